"""Operation counts for pilot-aided coherent receivers and for the
adjacent-difference Viterbi detector, with instrumented reference runs.

Cost conventions follow the usual accounting for these receivers: one complex
multiplication is 4 real multiplications and 3 real additions, one complex
addition is 2 real additions, and one complex division is 2 complex
multiplications plus 1 real division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class OpCounts:
    r_a: int
    r_m: int
    r_d: int

    def __post_init__(self):
        if min(self.r_a, self.r_m, self.r_d) < 0:
            raise ValueError("operation counts are non-negative")

    def __add__(self, other: "OpCounts") -> "OpCounts":
        return OpCounts(self.r_a + other.r_a, self.r_m + other.r_m, self.r_d + other.r_d)


@dataclass(frozen=True)
class PowerWeights:
    """Relative energy per real operation. The defaults are illustrative
    values for this package, not measured figures."""

    w_add: float = 1.0
    w_mul: float = 3.0
    w_div: float = 24.0

    def __post_init__(self):
        if min(self.w_add, self.w_mul, self.w_div) <= 0:
            raise ValueError("power weights must be positive")

    def cost(self, ops: OpCounts) -> float:
        return self.w_add * ops.r_a + self.w_mul * ops.r_m + self.w_div * ops.r_d


def _check_modulus(modulus: str) -> str:
    mod = modulus.upper()
    if mod not in ("CM", "QAM"):
        raise ValueError("modulus must be 'CM' or 'QAM'")
    return mod


def conventional_ops(n: int, n_p: int, m: int, modulus: str = "CM") -> OpCounts:
    """LS estimation, linear interpolation, zero forcing and minimum-distance slicing."""
    if not n > n_p >= 0 or m < 2:
        raise ValueError("need N > N_P >= 0 and M >= 2")
    if _check_modulus(modulus) == "CM":
        return OpCounts((13 + m) * n - (10 + m) * n_p,
                        2 * n * (6 + m) - 2 * n_p * (4 + m),
                        n - n_p)
    data = n - n_p
    return OpCounts(6 * n_p + (13 + 2 * m) * data,
                    8 * n_p + (12 + 4 * m) * data,
                    n_p + 2 * m * data)


def conventional_step_ops(n: int, n_p: int, m: int) -> list[OpCounts]:
    """Per-step counts of the constant-modulus chain (estimate, interpolate,
    equalise, detect) under the stated cost conventions."""
    data = n - n_p
    return [
        OpCounts(3 * n_p, 4 * n_p, 0),           # one complex multiplication per pilot
        OpCounts(7 * data, 4 * data, 0),         # one CM and two CA per interpolated bin
        OpCounts(6 * data, 8 * data, data),      # one complex division per data bin
        OpCounts(m * data, 2 * m * data, 0),     # M correlations per data bin
    ]


def d3_ops(n: int, n_p: int, m: int, modulus: str = "CM") -> OpCounts:
    """Adjacent-difference Viterbi detector over one OFDM symbol."""
    if not n > 2 * n_p:
        raise ValueError("need N > 2 N_P")
    if _check_modulus(modulus) == "CM":
        full = n - 2 * n_p - 1
        return OpCounts(full * 5 * 2 ** m + 7 * m * (n_p - 1),
                        full * (4 + 2 ** (m + 1)) + 2 * (n_p - 1) * (4 + 2 * m),
                        0)
    return OpCounts(5 * m * n_p + 10 * m * (n - n_p),
                    4 * m * n_p + 8 * m * (n - n_p),
                    2 * m * n_p + 4 * m * (n - n_p))


def coded_va_ops(n: int, constraint_k: int, decision: str = "hard") -> OpCounts:
    """Convolutional Viterbi decoding of N coded bits per OFDM symbol (rate 1/2).

    Hard decisions count XORs as one eighth of an addition.
    """
    if not 3 <= constraint_k <= 9:
        raise ValueError("constraint length must be in [3, 9]")
    if decision == "soft":
        v = n * 2 ** constraint_k
        return OpCounts(v, v, 0)
    if decision == "hard":
        return OpCounts(n * (2 ** constraint_k + 2 ** (constraint_k - 2)), 0, 0)
    raise ValueError("decision must be 'soft' or 'hard'")


def relative_power(a: OpCounts, b: OpCounts, w: PowerWeights = PowerWeights()) -> float:
    den = w.cost(b)
    if den <= 0:
        raise ValueError("reference operation count has zero cost")
    return w.cost(a) / den


# ---------------------------------------------------------------------------
# Instrumented execution
# ---------------------------------------------------------------------------

class OpCounter:
    """Arithmetic on Python complex/float values that tallies real operations."""

    def __init__(self):
        self.r_a = 0
        self.r_m = 0
        self.r_d = 0

    @property
    def counts(self) -> OpCounts:
        return OpCounts(self.r_a, self.r_m, self.r_d)

    def add(self, a: float, b: float) -> float:
        self.r_a += 1
        return a + b

    def sub(self, a: float, b: float) -> float:
        self.r_a += 1
        return a - b

    def mul(self, a: float, b: float) -> float:
        self.r_m += 1
        return a * b

    def less(self, a: float, b: float) -> bool:
        # a comparison is charged as one real addition (a subtraction and sign test)
        self.r_a += 1
        return a < b

    def cadd(self, a: complex, b: complex) -> complex:
        self.r_a += 2
        return a + b

    def csub(self, a: complex, b: complex) -> complex:
        self.r_a += 2
        return a - b

    def cmul(self, a: complex, b: complex) -> complex:
        self.r_m += 4
        self.r_a += 3
        return a * b

    def cdiv(self, a: complex, b: complex) -> complex:
        # a conj(b) / |b|^2: two complex multiplications and one real division
        self.cmul(a, b.conjugate())
        self.cmul(b, b.conjugate())
        self.r_d += 1
        return a / b


def counted_conventional_cm(r, pilot_pos, pilot_vals, points) -> tuple[np.ndarray, OpCounts]:
    """Run the constant-modulus coherent-L chain with counted arithmetic.

    Returns decided point indices for the non-pilot bins and the tally.
    """
    r = [complex(v) for v in np.asarray(r)]
    n = len(r)
    pos = [int(p) for p in pilot_pos]
    ops = OpCounter()
    h = {}
    for p, d in zip(pos, pilot_vals):
        h[p] = ops.cmul(r[p], complex(d).conjugate())
    pilot_set = set(pos)
    decided = []
    for v in range(n):
        if v in pilot_set:
            continue
        # nearest pilot pair, extended linearly at the band edges
        right = next((p for p in pos if p > v), None)
        left = next((p for p in reversed(pos) if p < v), None)
        if left is None:
            left, right = pos[0], pos[1]
        elif right is None:
            left, right = pos[-2], pos[-1]
        w = complex((v - left) / (right - left))
        slope = ops.csub(h[right], h[left])
        h_v = ops.cadd(h[left], ops.cmul(slope, w))
        eq = ops.cdiv(r[v], h_v)
        best, arg = None, 0
        for i, d in enumerate(points):
            d = complex(d)
            score = ops.add(ops.mul(eq.real, d.real), ops.mul(eq.imag, d.imag))
            if best is None or score > best:
                best, arg = score, i
        decided.append(arg)
    return np.array(decided), ops.counts


def counted_d3_viterbi_cm(r, anchored, anchor_vals, points) -> tuple[np.ndarray, OpCounts]:
    """Constant-modulus adjacent-difference Viterbi search with counted arithmetic.

    Maximises sum_c Re{r_c conj(r_c') conj(x) y}, which is the minimum of the
    quotient objective for unit-modulus symbols. Per step the four real
    cross products of r_c and r_c' are formed once; each branch then forms the
    two bracket sums and combines them with the precomputed symbol product.
    A pilot resets the path metric, so steps leaving a pilot need no
    accumulation. Returns point indices (-1 at anchors) and the tally.
    """
    r = [complex(v) for v in np.asarray(r)]
    anchored = [bool(a) for a in anchored]
    length = len(r)
    pts = [complex(p) for p in points]
    ops = OpCounter()

    def states(c):
        return [complex(anchor_vals[c])] if anchored[c] else pts

    cur = states(0)
    pm = [0.0] * len(cur)
    back: list[list[int]] = []
    for c in range(length - 1):
        nxt = states(c + 1)
        a, b = r[c], r[c + 1]
        p1 = ops.mul(a.real, b.real)
        p2 = ops.mul(a.imag, b.imag)
        p3 = ops.mul(a.imag, b.real)
        p4 = ops.mul(a.real, b.imag)
        restart = anchored[c]
        new_pm, arg = [], []
        for y in nxt:
            best, best_i = -np.inf, 0
            for i, x in enumerate(cur):
                u = x.conjugate() * y              # symbol product, a constant table
                re_part = ops.add(p1, p2)          # Re{a conj(b)}
                im_part = ops.sub(p3, p4)          # Im{a conj(b)}
                score = ops.sub(ops.mul(re_part, u.real), ops.mul(im_part, u.imag))
                total = score if restart else ops.add(pm[i], score)
                if len(cur) == 1:
                    best, best_i = total, i
                elif ops.less(best, total):
                    best, best_i = total, i
            new_pm.append(best)
            arg.append(best_i)
        back.append(arg)
        cur, pm = nxt, new_pm
    state = int(np.argmax(pm))
    out = [0] * length
    for c in range(length - 1, -1, -1):
        out[c] = -1 if anchored[c] else state
        if c > 0:
            state = back[c - 1][state]
    return np.array(out), ops.counts


def d3_frame_anchors(n: int, n_p: int) -> np.ndarray:
    """Pilot mask for an N-bin symbol whose two outermost bins are unused and
    whose N_P pilots are spread evenly from bin 1 to bin N-2."""
    if n_p < 2 or n - 2 < 2 * n_p - 1:
        raise ValueError("need at least two pilots separated by data bins")
    pos = np.round(np.linspace(1, n - 2, n_p)).astype(int)
    if np.any(np.diff(pos) < 2):
        raise ValueError("pilots too dense")
    mask = np.zeros(n, dtype=bool)
    mask[pos] = True
    return mask


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------

REFERENCE_TABLE_BPSK = {
    "n": (128, 256, 512, 1024, 2048),
    "eta_ra": (0.58, 1.07, 1.21, 1.27, 1.31),
    "eta_rm": (0.77, 0.72, 0.68, 0.64, 0.61),
    "r_d": (96, 192, 384, 768, 1536),
    "eta_p": (0.20, 0.21, 0.22, 0.26, 0.31),
}

REFERENCE_TABLE_QAM = {
    (16, 512): {"eta_ra": 1.25, "eta_rm": 0.52, "eta_rd": 0.98, "eta_p": 0.94},
    (16, 2048): {"eta_ra": 1.25, "eta_rm": 0.47, "eta_rd": 0.98, "eta_p": 0.84},
    (64, 512): {"eta_ra": 1.64, "eta_rm": 0.64, "eta_rd": 0.99, "eta_p": 0.91},
    (64, 2048): {"eta_ra": 1.64, "eta_rm": 0.62, "eta_rd": 0.99, "eta_p": 0.80},
}

REFERENCE_TABLE_CODED = {
    "k": (3, 4, 5, 6, 7),
    "soft": (0.96, 0.97, 0.97, 0.98, 0.99),
    "hard": (0.24, 0.26, 0.28, 0.33, 0.41),
}


@dataclass(frozen=True)
class ComplexityRow:
    n: int
    n_p: int
    m: int
    eta_ra: float
    eta_rm: float
    r_d_or_eta_rd: float
    eta_p: float
    label: str = ""


def _ratio(a: int, b: int) -> float:
    return a / b if b else float("nan")


def compare(n: int, n_p: int, m: int, modulus: str, w: PowerWeights = PowerWeights(),
            m_d3: int | None = None) -> ComplexityRow:
    """Ratios of detector to conventional counts. For constant modulus the
    division column holds the conventional receiver's division count."""
    conv = conventional_ops(n, n_p, m, modulus)
    d3 = d3_ops(n, n_p, m if m_d3 is None else m_d3, modulus)
    col = conv.r_d if modulus.upper() == "CM" else _ratio(d3.r_d, conv.r_d)
    return ComplexityRow(n, n_p, m, _ratio(d3.r_a, conv.r_a), _ratio(d3.r_m, conv.r_m),
                         col, relative_power(d3, conv, w), modulus.upper())


def coded_eta_p(n: int, constraint_k: int, decision: str, w: PowerWeights = PowerWeights(),
                m: int = 2) -> float:
    """Relative power of the coded detector chain (BPSK, N_P = N/4).

    Soft decoding adds N - N_P divisions to the adjacent-difference receiver
    for the reliability weights it would otherwise not compute.
    """
    n_p = n // 4
    va = coded_va_ops(n, constraint_k, decision)
    d3 = d3_ops(n, n_p, m, "CM") + va
    if decision == "soft":
        d3 = d3 + OpCounts(0, 0, n - n_p)
    conv = conventional_ops(n, n_p, m, "CM") + va
    return relative_power(d3, conv, w)


def table_rows(w: PowerWeights = PowerWeights()) -> list[ComplexityRow]:
    rows = [compare(n, n // 4, 2, "CM", w) for n in REFERENCE_TABLE_BPSK["n"]]
    rows += [compare(n, n // 4, m, "QAM", w) for (m, n) in REFERENCE_TABLE_QAM]
    for decision in ("soft", "hard"):
        for k in REFERENCE_TABLE_CODED["k"]:
            rows.append(ComplexityRow(2048, 512, 2, float("nan"), float("nan"), float("nan"),
                                      coded_eta_p(2048, k, decision, w), f"coded-{decision}-K{k}"))
    return rows


def reference_values(row: ComplexityRow) -> tuple:
    """Reference (eta_ra, eta_rm, r_d or eta_rd, eta_p) for a table row; blanks when absent."""
    if row.label == "CM" and row.n in REFERENCE_TABLE_BPSK["n"] and row.n_p == row.n // 4:
        i = REFERENCE_TABLE_BPSK["n"].index(row.n)
        t = REFERENCE_TABLE_BPSK
        return t["eta_ra"][i], t["eta_rm"][i], t["r_d"][i], t["eta_p"][i]
    if row.label == "QAM" and (row.m, row.n) in REFERENCE_TABLE_QAM:
        t = REFERENCE_TABLE_QAM[(row.m, row.n)]
        return t["eta_ra"], t["eta_rm"], t["eta_rd"], t["eta_p"]
    if row.label.startswith("coded-"):
        _, decision, k = row.label.split("-")
        i = REFERENCE_TABLE_CODED["k"].index(int(k[1:]))
        return "", "", "", REFERENCE_TABLE_CODED[decision][i]
    return "", "", "", ""
