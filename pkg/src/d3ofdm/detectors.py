"""Data detectors.

Coherent baselines (perfect CSI and pilot-interpolated CSI), the GLRT
sequence detector, and the adjacent-difference family: exhaustive search,
the anchored Viterbi trellis, the two-dimensional objective, multi-antenna
combining, two-step resource-block detection and codebook-restricted search.

Received data are handled internally as arrays of shape ``(S, B, K)``:
``S`` independent segments (or lines), ``B`` receive branches and ``K``
cells per segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from ._accel import njit, pick
from .ofdm import (Constellation, FrameLayout, ResourceBlockLayout, SegmentLayout,
                   indices_to_bits)

BRUTE_FORCE_BUDGET = 1 << 24

# objective selectors shared by the exhaustive-search kernels
_FORM_QUOTIENT = 0
_FORM_BPSK = 1
_FORM_GLRT = 2


@dataclass
class DetectionResult:
    """Decisions for the data cells of one or more segments.

    ``indices`` index into the constellation; ``symbols`` and ``bits`` are
    derived from them. ``metric`` is the optimised objective per segment and
    ``erasures`` counts cells decided by the tie rule because the channel
    estimate was zero.
    """

    indices: np.ndarray
    symbols: np.ndarray
    bits: np.ndarray
    metric: np.ndarray
    erasures: int = 0


@dataclass
class TrellisState:
    step: int
    path_metrics: np.ndarray
    survivors: np.ndarray
    state_values: np.ndarray


@dataclass
class CsiEstimate:
    h_hat: np.ndarray
    method: str


def _result(indices: np.ndarray, c: Constellation, metric, erasures: int = 0) -> DetectionResult:
    indices = np.asarray(indices, dtype=np.int64)
    return DetectionResult(indices, c.points[indices], indices_to_bits(indices, c),
                           np.asarray(metric, dtype=float), erasures)


def _as_sbk(r, branches: bool = False) -> tuple[np.ndarray, tuple]:
    """Reshape to (S, B, K); returns the array and the leading batch shape."""
    r = np.asarray(r, dtype=np.complex128)
    if branches:
        if r.ndim < 2:
            raise ValueError("branch input needs a branch axis")
        lead = r.shape[:-2]
        return np.ascontiguousarray(r.reshape((-1,) + r.shape[-2:])), lead
    lead = r.shape[:-1]
    return np.ascontiguousarray(r.reshape(-1, 1, r.shape[-1])), lead


def _unflatten(res: DetectionResult, lead: tuple) -> DetectionResult:
    def shape(a, tail):
        return a.reshape(lead + tail)
    res.indices = shape(res.indices, res.indices.shape[1:])
    res.symbols = shape(res.symbols, res.symbols.shape[1:])
    res.bits = shape(res.bits, res.bits.shape[1:])
    res.metric = res.metric.reshape(lead)
    return res


# ---------------------------------------------------------------------------
# Coherent detection
# ---------------------------------------------------------------------------

def coherent_mld(r, h, c: Constellation, branches: bool = False) -> DetectionResult:
    """Symbol-by-symbol ML decision with known channel: argmin sum_b |r_b - H_b d|^2.

    With several branches this is maximum-ratio combining. Cells whose channel
    is zero on every branch are decided as point 0 and counted as erasures.
    """
    r3, lead = _as_sbk(r, branches)
    h3, _ = _as_sbk(np.broadcast_to(h, np.shape(r)), branches)
    dist = np.abs(r3[..., None] - h3[..., None] * c.points) ** 2
    idx = np.argmin(dist.sum(axis=1), axis=-1)
    erasures = int(np.all(h3 == 0, axis=1).sum())
    res = _result(idx, c, dist.sum(axis=1).min(-1).sum(-1), erasures)
    return _unflatten(res, lead)


def ls_estimate_interpolate(r, pilot_mask, pilot_value: complex | np.ndarray = 1.0,
                            kind: str = "linear") -> CsiEstimate:
    """Least-squares channel at pilots, interpolated across the band.

    ``r`` has shape (..., N); pilots sit where ``pilot_mask`` is true. Linear
    interpolation extends the outermost pilot pair's line beyond the band
    edges; the spline uses not-a-knot end conditions and extends its end
    pieces. A single pilot yields a constant estimate.
    """
    r = np.asarray(r, dtype=np.complex128)
    pilot_mask = np.asarray(pilot_mask, dtype=bool)
    pos = np.flatnonzero(pilot_mask)
    if pos.size < 1:
        raise ValueError("channel estimation needs at least one pilot")
    pv = np.broadcast_to(np.asarray(pilot_value, dtype=np.complex128), pilot_mask.shape)[pos]
    h_p = r[..., pos] / pv
    v = np.arange(r.shape[-1])
    if pos.size == 1:
        h_hat = np.repeat(h_p, r.shape[-1], axis=-1)
    elif kind == "linear":
        # segment index for each subcarrier, clamped to the outermost pairs
        seg = np.clip(np.searchsorted(pos, v, side="right") - 1, 0, pos.size - 2)
        x0, x1 = pos[seg], pos[seg + 1]
        w = (v - x0) / (x1 - x0)
        h_hat = h_p[..., seg] * (1 - w) + h_p[..., seg + 1] * w
    elif kind == "spline":
        if pos.size < 4:
            spline = CubicSpline(pos, h_p, axis=-1, bc_type="natural")
        else:
            spline = CubicSpline(pos, h_p, axis=-1)
        h_hat = spline(v)
    else:
        raise ValueError(f"unknown interpolation kind {kind!r}")
    h_hat = np.array(h_hat, dtype=np.complex128)
    h_hat[..., pos] = h_p
    return CsiEstimate(h_hat, {"linear": "ls-linear", "spline": "ls-spline"}.get(kind, kind))


def zf_equalize(r, est: CsiEstimate | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Single-tap zero forcing. Returns the equalised cells and an erasure mask
    marking bins where the estimate is exactly zero (those cells are left at 0)."""
    h = est.h_hat if isinstance(est, CsiEstimate) else np.asarray(est)
    r = np.asarray(r, dtype=np.complex128)
    zero = h == 0
    out = np.zeros(np.broadcast_shapes(r.shape, h.shape), dtype=np.complex128)
    np.divide(r, h, out=out, where=~zero)
    return out, np.broadcast_to(zero, out.shape)


def zf_detect(r, est, c: Constellation) -> DetectionResult:
    """Zero-forcing equalisation followed by nearest-point slicing."""
    eq, zero = zf_equalize(r, est)
    idx = np.argmin(np.abs(eq[..., None] - c.points) ** 2, axis=-1)
    idx = np.where(zero, 0, idx)
    res = DetectionResult(idx, c.points[idx], np.zeros(0, np.uint8), np.zeros(idx.shape[:-1]),
                          int(zero.sum()))
    res.bits = indices_to_bits(idx, c)
    return res


# ---------------------------------------------------------------------------
# Exhaustive search kernels (adjacent-difference, BPSK correlation, GLRT)
# ---------------------------------------------------------------------------

@njit
def _search_loops(r, pilot_mask, pilot_vals, points, form):
    n_seg, n_br, k = r.shape
    m = points.size
    data_pos = np.flatnonzero(~pilot_mask)
    kd = data_pos.size
    n_trials = m ** kd
    best_idx = np.zeros((n_seg, kd), dtype=np.int64)
    best_val = np.empty(n_seg)
    digits = np.zeros(kd, dtype=np.int64)
    seq = pilot_vals.copy()
    for s in range(n_seg):
        best = np.inf
        digits[:] = 0
        for t in range(n_trials):
            for i in range(kd):
                seq[data_pos[i]] = points[digits[i]]
            val = 0.0
            if form == 2:
                energy = 0.0
                for v in range(k):
                    energy += seq[v].real * seq[v].real + seq[v].imag * seq[v].imag
                for b in range(n_br):
                    acc = 0j
                    for v in range(k):
                        acc += np.conj(seq[v]) * r[s, b, v]
                    val -= (acc.real * acc.real + acc.imag * acc.imag) / energy
            else:
                for v in range(k - 1):
                    term = 0.0
                    for b in range(n_br):
                        if form == 0:
                            z = r[s, b, v] / seq[v] - r[s, b, v + 1] / seq[v + 1]
                            term += z.real * z.real + z.imag * z.imag
                        else:
                            z = r[s, b, v] * np.conj(r[s, b, v + 1])
                            term -= z.real * (seq[v].real * seq[v + 1].real)
                    val += term
            if val < best:
                best = val
                for i in range(kd):
                    best_idx[s, i] = digits[i]
            # odometer, last data cell fastest
            i = kd - 1
            while i >= 0:
                digits[i] += 1
                if digits[i] < m:
                    break
                digits[i] = 0
                i -= 1
        best_val[s] = best
    return best_idx, best_val


def _search_vectorised(r, pilot_mask, pilot_vals, points, form, chunk_elems=1 << 22):
    n_seg, n_br, k = r.shape
    m = points.size
    data_pos = np.flatnonzero(~pilot_mask)
    kd = data_pos.size
    n_trials = m ** kd
    best_idx = np.zeros((n_seg, kd), dtype=np.int64)
    best_val = np.full(n_seg, np.inf)
    chunk = max(1, chunk_elems // max(1, n_seg * n_br * k))
    for t0 in range(0, n_trials, chunk):
        t = np.arange(t0, min(n_trials, t0 + chunk))
        digits = np.stack(np.unravel_index(t, (m,) * kd), axis=-1) if kd else np.zeros((t.size, 0), np.int64)
        seq = np.broadcast_to(pilot_vals, (t.size, k)).copy()
        seq[:, data_pos] = points[digits]
        if form == _FORM_GLRT:
            energy = (seq.real ** 2 + seq.imag ** 2).sum(-1)
            corr = np.einsum("sbk,tk->sbt", r, np.conj(seq))
            val = -((corr.real ** 2 + corr.imag ** 2) / energy).sum(1)
        elif form == _FORM_QUOTIENT:
            q = r[:, :, None, :] / seq[None, None]
            z = q[..., :-1] - q[..., 1:]
            val = (z.real ** 2 + z.imag ** 2).sum(1).sum(-1)
        else:
            z = (r[..., :-1] * np.conj(r[..., 1:])).real.sum(1)
            val = -(z @ (seq[:, :-1].real * seq[:, 1:].real).T)
        j = np.argmin(val, axis=1)
        v = val[np.arange(n_seg), j]
        better = v < best_val
        best_val[better] = v[better]
        best_idx[better] = digits[j[better]]
    return best_idx, best_val


_search = pick(_search_loops, _search_vectorised)


def _check_budget(m: int, kd: int, budget: int) -> None:
    if m ** kd > budget:
        raise ValueError(f"{m}^{kd} trial sequences exceed the brute-force budget {budget}; "
                         f"use the Viterbi detector")


def _segment_search(r3, layout: SegmentLayout, c: Constellation, form: int, budget: int):
    _check_budget(c.size, layout.k_d, budget)
    if r3.shape[-1] != layout.k:
        raise ValueError(f"segment length {r3.shape[-1]} does not match layout k={layout.k}")
    pilot_vals = np.where(layout.pilot_mask, layout.pilot_value, 0).astype(np.complex128)
    return _search(r3, layout.pilot_mask, pilot_vals, c.points.astype(np.complex128), form)


def d3_bruteforce(r, layout: SegmentLayout, c: Constellation, *, branches: bool = False,
                  form: str = "auto", budget: int = BRUTE_FORCE_BUDGET) -> DetectionResult:
    """Exhaustive minimisation of sum_v |r_v/d_v - r_{v+1}/d_{v+1}|^2 with pilots pinned.

    ``form="auto"`` uses the equivalent correlation form
    max sum_v Re{r_v conj(r_{v+1})} d_v d_{v+1} for BPSK and the quotient form
    otherwise. Trials run in lexicographic order of point indices and the
    first minimiser is kept.
    """
    r3, lead = _as_sbk(r, branches)
    if form == "auto":
        form = "bpsk" if c.name == "BPSK" and np.isreal(layout.pilot_value) else "quotient"
    code = {"quotient": _FORM_QUOTIENT, "bpsk": _FORM_BPSK}[form]
    idx, val = _segment_search(r3, layout, c, code, budget)
    return _unflatten(_result(idx, c, val), lead)


def d3_simo(r_branches, layout: SegmentLayout, c: Constellation, *, method: str = "viterbi",
            budget: int = BRUTE_FORCE_BUDGET) -> DetectionResult:
    """Adjacent-difference detection with the objective summed over receive branches.

    ``r_branches`` is a sequence of per-branch segments or an array whose
    second-to-last axis indexes branches.
    """
    if isinstance(r_branches, (list, tuple)):
        if len(r_branches) == 0:
            raise ValueError("at least one receive branch is required")
        arr = np.stack([np.asarray(b) for b in r_branches], axis=-2)
    else:
        arr = np.asarray(r_branches)
        if arr.ndim < 2 or arr.shape[-2] == 0:
            raise ValueError("at least one receive branch is required")
    if method == "bruteforce":
        return d3_bruteforce(arr, layout, c, branches=True, form="quotient", budget=budget)
    return d3_viterbi(arr, layout, c, branches=True)


def glrt_mlsd(r, layout: SegmentLayout, c: Constellation, *, branches: bool = False,
              budget: int = BRUTE_FORCE_BUDGET) -> DetectionResult:
    """Exhaustive GLRT sequence detection: max sum_b |d^H r_b|^2 / ||d||^2 with pilots pinned."""
    r3, lead = _as_sbk(r, branches)
    idx, val = _segment_search(r3, layout, c, _FORM_GLRT, budget)
    return _unflatten(_result(idx, c, val), lead)


# ---------------------------------------------------------------------------
# Anchored Viterbi trellis
# ---------------------------------------------------------------------------

@njit
def _viterbi_loops(r, anchored, anchor_vals, points, cm):
    n_seg, n_br, length = r.shape
    m = points.size
    out = np.empty((n_seg, length), dtype=np.int64)
    metric = np.empty(n_seg)
    back = np.zeros((length, m), dtype=np.int64)
    pm = np.empty(m)
    new = np.empty(m)
    cur = np.empty(m, dtype=np.complex128)
    nxt = np.empty(m, dtype=np.complex128)
    for s in range(n_seg):
        if anchored[0]:
            n_cur = 1
            cur[0] = anchor_vals[s, 0]
        else:
            n_cur = m
            cur[:] = points
        pm[:n_cur] = 0.0
        for c in range(length - 1):
            if anchored[c + 1]:
                n_nxt = 1
                nxt[0] = anchor_vals[s, c + 1]
            else:
                n_nxt = m
                nxt[:] = points
            for j in range(n_nxt):
                y = nxt[j]
                best = np.inf
                arg = 0
                for i in range(n_cur):
                    x = cur[i]
                    acc = 0.0
                    for b in range(n_br):
                        if cm:
                            z = r[s, b, c] * np.conj(r[s, b, c + 1]) * np.conj(x) * y
                            acc += -2.0 * z.real
                        else:
                            z = r[s, b, c] / x - r[s, b, c + 1] / y
                            acc += z.real * z.real + z.imag * z.imag
                    val = pm[i] + acc
                    if val < best:
                        best = val
                        arg = i
                new[j] = best
                back[c + 1, j] = arg
            for j in range(n_nxt):
                pm[j] = new[j]
                cur[j] = nxt[j]
            n_cur = n_nxt
        best = np.inf
        arg = 0
        for i in range(n_cur):
            if pm[i] < best:
                best = pm[i]
                arg = i
        metric[s] = best
        state = arg
        for c in range(length - 1, -1, -1):
            out[s, c] = -1 if anchored[c] else state
            if c > 0:
                state = back[c, state]
    return out, metric


def _viterbi_vectorised(r, anchored, anchor_vals, points, cm, record=None):
    n_seg, n_br, length = r.shape
    m = points.size
    rows = np.arange(n_seg)

    def states(c):
        if anchored[c]:
            return anchor_vals[:, c:c + 1]
        return np.broadcast_to(points, (n_seg, m))

    cur = states(0)
    pm = np.zeros(cur.shape)
    back = []
    for c in range(length - 1):
        nxt = states(c + 1)
        a = r[:, :, c][:, :, None, None]
        b = r[:, :, c + 1][:, :, None, None]
        x = cur[:, None, :, None]
        y = nxt[:, None, None, :]
        if cm:
            acc = (-2.0 * (a * np.conj(b) * np.conj(x) * y).real).sum(1)
        else:
            z = a / x - b / y
            acc = (z.real ** 2 + z.imag ** 2).sum(1)
        total = pm[:, :, None] + acc
        arg = np.argmin(total, axis=1)
        pm = np.take_along_axis(total, arg[:, None, :], axis=1)[:, 0, :]
        back.append(arg)
        if record is not None:
            record.append(TrellisState(c + 1, pm.copy(), arg.copy(), nxt.copy()))
        cur = nxt
    state = np.argmin(pm, axis=1)
    metric = pm[rows, state]
    out = np.empty((n_seg, length), dtype=np.int64)
    for c in range(length - 1, -1, -1):
        out[:, c] = -1 if anchored[c] else state
        if c > 0:
            state = back[c - 1][rows, state]
    return out, metric


_viterbi = pick(_viterbi_loops, _viterbi_vectorised)


def _use_cm(c: Constellation, anchor_vals: np.ndarray, metric: str) -> bool:
    if metric == "cm":
        return True
    if metric == "quotient":
        return False
    unit = np.allclose(np.abs(c.points), 1.0)
    anchors_unit = anchor_vals.size == 0 or np.allclose(np.abs(anchor_vals), 1.0)
    return bool(unit and anchors_unit)


def viterbi_line(r, anchored, anchor_vals, c: Constellation, *, branches: bool = False,
                 metric: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Viterbi search along lines of cells, some of which are anchored to known values.

    Args:
        r: received cells, shape (..., L) or (..., B, L) with ``branches``.
        anchored: boolean mask of length L, shared by all lines.
        anchor_vals: known values, broadcastable to (..., L); read only at anchors.
        metric: "quotient" for |r_c/x - r_c'/y|^2, "cm" for the constant-modulus
            form -2 Re{r_c conj(r_c') conj(x) y}, or "auto" to pick "cm" when
            all states and anchors have unit modulus.

    Returns:
        Point indices of shape (..., L) (``-1`` at anchors) and the final path
        metric per line.
    """
    r3, lead = _as_sbk(r, branches)
    anchored = np.ascontiguousarray(np.asarray(anchored, dtype=bool))
    length = r3.shape[-1]
    if anchored.shape != (length,):
        raise ValueError("anchor mask must match the line length")
    av = np.ascontiguousarray(np.broadcast_to(np.asarray(anchor_vals, dtype=np.complex128),
                                              lead + (length,)).reshape(-1, length))
    cm = _use_cm(c, av[:, anchored], metric)
    out, met = _viterbi(r3, anchored, av, c.points.astype(np.complex128), cm)
    return out.reshape(lead + (length,)), met.reshape(lead)


def d3_viterbi(r, layout: SegmentLayout, c: Constellation, *, branches: bool = False,
               metric: str = "auto") -> DetectionResult:
    """Viterbi search for the adjacent-difference objective over one segment.

    The trellis has one state per constellation point at data cells and a
    single state at each pilot, so a pilot at either end terminates it.
    """
    r3, lead = _as_sbk(r, branches)
    if r3.shape[-1] != layout.k:
        raise ValueError(f"segment length {r3.shape[-1]} does not match layout k={layout.k}")
    anchor_vals = np.where(layout.pilot_mask, layout.pilot_value, 0).astype(np.complex128)
    out, met = viterbi_line(r3, layout.pilot_mask, anchor_vals, c, branches=True, metric=metric)
    idx = out[:, ~layout.pilot_mask]
    return _unflatten(_result(idx, c, met), lead)


def trellis_trace(r, layout: SegmentLayout, c: Constellation, metric: str = "auto") -> list[TrellisState]:
    """Per-step path metrics and survivors for a single segment (inspection aid)."""
    r3, _ = _as_sbk(np.asarray(r)[None] if np.ndim(r) == 1 else r)
    anchor_vals = np.where(layout.pilot_mask, layout.pilot_value, 0).astype(np.complex128)[None]
    cm = _use_cm(c, anchor_vals[:, layout.pilot_mask], metric)
    record: list[TrellisState] = []
    _viterbi_vectorised(r3[:1], layout.pilot_mask, anchor_vals, c.points, cm, record)
    for st in record:
        st.path_metrics = st.path_metrics[0]
        st.survivors = st.survivors[0]
        st.state_values = st.state_values[0]
    return record


# ---------------------------------------------------------------------------
# Objectives
# ---------------------------------------------------------------------------

def d3_objective(d, r) -> float:
    """One-dimensional objective sum_v |r_v/d_v - r_{v+1}/d_{v+1}|^2."""
    d = np.asarray(d, dtype=np.complex128)
    if np.any(d == 0):
        raise ValueError("trial symbols must be non-zero")
    q = np.asarray(r, dtype=np.complex128) / d
    return float(np.sum(np.abs(np.diff(q, axis=-1)) ** 2))


def d3_objective_2d(d_grid, r_grid) -> float:
    """Sum of squared quotient differences over every horizontally and every
    vertically adjacent pair of cells in an L x K grid."""
    d = np.asarray(d_grid, dtype=np.complex128)
    r = np.asarray(r_grid, dtype=np.complex128)
    if d.shape != r.shape or d.ndim != 2:
        raise ValueError("trial and received grids must be matching 2-D arrays")
    if np.any(d == 0):
        raise ValueError("trial symbols must be non-zero")
    q = r / d
    along_k = np.abs(np.diff(q, axis=1)) ** 2
    along_l = np.abs(np.diff(q, axis=0)) ** 2
    return float(along_k.sum() + along_l.sum())


def d3_coded(r, codebook, *, branches: bool = False, budget: int = BRUTE_FORCE_BUDGET) -> DetectionResult:
    """Pick the modulated codeword minimising the adjacent-difference objective.

    ``codebook`` is a (C, K) array of complex sequences, pilots included.
    Returned ``indices`` are codeword indices (first minimiser wins).
    """
    cb = np.asarray(codebook, dtype=np.complex128)
    if cb.ndim != 2:
        raise ValueError("codebook must be a 2-D array of sequences")
    if cb.shape[0] > budget:
        raise ValueError("codebook larger than the brute-force budget")
    if np.any(cb == 0):
        raise ValueError("codewords must not contain zero symbols")
    r3, lead = _as_sbk(r, branches)
    q = r3[:, :, None, :] / cb[None, None]
    z = q[..., :-1] - q[..., 1:]
    val = (z.real ** 2 + z.imag ** 2).sum(-1).sum(1)
    j = np.argmin(val, axis=1)
    res = DetectionResult(j.reshape(lead), cb[j].reshape(lead + (cb.shape[1],)),
                          np.zeros(0, np.uint8), val[np.arange(val.shape[0]), j].reshape(lead))
    return res


# ---------------------------------------------------------------------------
# Frames and resource blocks
# ---------------------------------------------------------------------------

def detect_segments(r_frame, frame: FrameLayout, c: Constellation, detector: str, *,
                    branches: bool = False, h=None) -> np.ndarray:
    """Run a per-segment detector across a tiled frame.

    Returns constellation indices of shape (..., n_data) in the frame's data
    order.
    """
    r3, lead = _as_sbk(r_frame, branches)
    seg = frame.segment_index
    cells = r3[:, :, seg]                       # (S, B, nseg, k)
    cells = np.moveaxis(cells, 2, 1).reshape(-1, r3.shape[1], frame.segment.k)
    if detector in ("d3-va", "d3-simo"):
        res = d3_viterbi(cells, frame.segment, c, branches=True)
    elif detector == "d3-bf":
        res = d3_bruteforce(cells, frame.segment, c, branches=True)
    elif detector == "glrt":
        res = glrt_mlsd(cells, frame.segment, c, branches=True)
    else:
        raise ValueError(f"{detector!r} is not a segment detector")
    idx = res.indices.reshape(r3.shape[0], seg.shape[0], frame.segment.k_d)
    data_cells = seg[:, ~frame.segment.pilot_mask]           # (nseg, kd)
    out = np.zeros((r3.shape[0], frame.n), dtype=np.int64)
    out[:, data_cells.ravel()] = idx.reshape(r3.shape[0], -1)
    return out[:, ~frame.pilot_mask].reshape(lead + (frame.n_data,))


def detect_resource_block(r_grid, layout: ResourceBlockLayout, c: Constellation, *,
                          branches: bool = False, order: str = "rows-first",
                          metric: str = "auto") -> DetectionResult:
    """Two-step detection of a resource block.

    With ``order="rows-first"`` the pilot-bearing rows (one subcarrier across
    all OFDM symbols of the block) are detected first, each anchored by its
    pilots; every column is then detected along frequency with the decided
    pilot-row cells as anchors. ``order="cols-first"`` swaps the roles of
    rows and columns.

    ``r_grid`` has shape (..., rows, cols) or (..., B, rows, cols).
    Returned indices cover the data cells in C order.
    """
    r = np.asarray(r_grid, dtype=np.complex128)
    if order == "cols-first":
        flipped = ResourceBlockLayout(tuple((cc, rr) for rr, cc in layout.pilot_cells),
                                      layout.cols, layout.rows, layout.pilot_value)
        res = detect_resource_block(np.swapaxes(r, -1, -2), flipped, c, branches=branches,
                                    order="rows-first", metric=metric)
        full = np.zeros(r.shape[:-3 if branches else -2] + (layout.cols, layout.rows), np.int64)
        full[..., ~flipped.pilot_mask] = res.indices
        idx = np.swapaxes(full, -1, -2)[..., ~layout.pilot_mask]
        return _result_nd(idx, c, res.metric)
    if order != "rows-first":
        raise ValueError("order must be 'rows-first' or 'cols-first'")
    if not branches:
        r = r[..., None, :, :]
    lead = r.shape[:-3]
    r = r.reshape((-1,) + r.shape[-3:])             # (S, B, rows, cols)
    n, nb = r.shape[0], r.shape[1]
    mask = layout.pilot_mask
    decided = np.where(mask, layout.pilot_value, 0).astype(np.complex128)
    decided = np.broadcast_to(decided, (n,) + mask.shape).copy()
    known = mask.copy()
    total_metric = np.zeros(n)
    for row in np.flatnonzero(mask.any(axis=1)):
        out, met = viterbi_line(r[:, :, row, :], mask[row], decided[:, row, :], c,
                                branches=True, metric=metric)
        free = ~mask[row]
        decided[:, row, free] = c.points[out[:, free]]
        known[row, :] = True
        total_metric += met
    col_anchor = known[:, 0]
    if not col_anchor.any():
        raise ValueError("no anchored cells available for the column pass")
    lines = np.moveaxis(r, 3, 1).reshape(n * layout.cols, nb, layout.rows)
    anchors = np.moveaxis(decided, 2, 1).reshape(n * layout.cols, layout.rows)
    out, met = viterbi_line(lines, col_anchor, anchors, c, branches=True, metric=metric)
    out = out.reshape(n, layout.cols, layout.rows)
    free = ~col_anchor
    cols_idx = np.moveaxis(out, 1, 2)               # (S, rows, cols)
    idx_grid = np.full((n,) + mask.shape, -1, dtype=np.int64)
    idx_grid[:, free, :] = cols_idx[:, free, :]
    for row in np.flatnonzero(~free):
        vals = decided[:, row, :]
        idx_grid[:, row, :] = np.argmin(np.abs(vals[..., None] - c.points) ** 2, axis=-1)
    total_metric += met.reshape(n, layout.cols).sum(1)
    idx = idx_grid[:, ~mask].reshape(lead + (layout.n_data,))
    return _result_nd(idx, c, total_metric.reshape(lead))


def _result_nd(idx, c: Constellation, metric) -> DetectionResult:
    idx = np.asarray(idx, dtype=np.int64)
    return DetectionResult(idx, c.points[idx], indices_to_bits(idx, c), np.asarray(metric, float))


# ---------------------------------------------------------------------------
# Frame-level coherent receivers
# ---------------------------------------------------------------------------

def coherent_estimated(r_frame, pilot_mask, pilot_value, c: Constellation, kind: str,
                       *, branches: bool = False) -> np.ndarray:
    """Pilot-interpolated coherent detection over full frames; returns data-cell indices.

    Each branch is estimated separately and the decision combines branches
    as maximum-ratio combining with the estimates. A single branch reduces to
    zero forcing followed by slicing.
    """
    est = ls_estimate_interpolate(r_frame, pilot_mask, pilot_value, kind)
    res = coherent_mld(np.asarray(r_frame)[..., ~np.asarray(pilot_mask)],
                       est.h_hat[..., ~np.asarray(pilot_mask)], c, branches=branches)
    return res.indices


def rb_estimate_interpolate(r_grid, layout: ResourceBlockLayout, kind: str = "linear",
                            *, branches: bool = False) -> CsiEstimate:
    """Pilot-interpolated channel over a resource block.

    Each pilot-bearing column is interpolated along frequency from its own
    pilots; every row is then interpolated along time across those columns.
    """
    r = np.asarray(r_grid, dtype=np.complex128)
    mask = layout.pilot_mask
    cols = np.flatnonzero(mask.any(axis=0))
    col_est = np.zeros(r.shape, dtype=np.complex128)
    pv = np.broadcast_to(np.asarray(layout.pilot_value, dtype=np.complex128), mask.shape)
    for c in cols:
        est = ls_estimate_interpolate(r[..., :, c], mask[:, c], pv[:, c], kind)
        col_est[..., :, c] = est.h_hat
    col_mask = np.zeros(layout.cols, dtype=bool)
    col_mask[cols] = True
    h = ls_estimate_interpolate(col_est, col_mask, 1.0, kind).h_hat
    return CsiEstimate(h, {"linear": "ls-linear", "spline": "ls-spline"}.get(kind, kind))


def coherent_rb(r_grid, layout: ResourceBlockLayout, c: Constellation, kind: str,
                *, branches: bool = False) -> np.ndarray:
    """Coherent detection of a resource block with interpolated CSI; returns data-cell indices."""
    est = rb_estimate_interpolate(r_grid, layout, kind)
    data = ~layout.pilot_mask
    r = np.asarray(r_grid)[..., data]
    res = coherent_mld(r, est.h_hat[..., data], c, branches=branches)
    return res.indices


DETECTOR_NAMES = ("coherent", "coherent-l", "coherent-s", "glrt", "d3-bf", "d3-va",
                  "d3-simo", "d3-rb", "d3-coded")
