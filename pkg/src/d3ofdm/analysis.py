"""Sequence- and bit-error predictions for adjacent-difference detection.

Conventions: E|H|^2 = 1 and unit-energy symbols, so the average SNR is
gamma = 1 / (2 sigma^2) with sigma^2 the per-component noise variance.

Three kinds of prediction are provided:

* closed forms, evaluated verbatim (``method="closed-form"``);
* numerical averaging of the conditional pair-product model over the fading
  distribution (``method="quadrature"``), with either the exact Gaussian tail
  or its exponential approximation;
* exact differential-detection results where they apply (two-cell
  single-pilot segments, with or without receive diversity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .numerics import exp_integral_e1, integrate_pieces, q_approx, q_exact
from .ofdm import SegmentLayout

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SnrPoint:
    gamma_bar: float

    def __post_init__(self):
        if not self.gamma_bar > 0:
            raise ValueError("average SNR must be positive")

    @classmethod
    def from_db(cls, db: float) -> "SnrPoint":
        return cls(10.0 ** (db / 10.0))

    @property
    def db(self) -> float:
        return 10.0 * math.log10(self.gamma_bar)

    @property
    def noise_var(self) -> float:
        return 0.5 / self.gamma_bar


def _gamma(snr) -> float:
    return snr.gamma_bar if isinstance(snr, SnrPoint) else float(snr)


@dataclass(frozen=True)
class SepPrediction:
    p_s: float
    p_b_mid: float
    p_b_lower: float
    p_b_upper: float
    method: str


@dataclass(frozen=True)
class PairStats:
    """Mean and variance of Re{r_v conj(r_w)} for adjacent cells v, w."""

    mu_sp: float
    sigma_sp_sq: float


def ber_from_sep(p_s: float, k_d: int, method: str = "closed-form") -> SepPrediction:
    """Bit-error bounds p_s/k_d <= P_B <= p_s and their midpoint p_s / (0.5 (1 + k_d))."""
    if not 0.0 <= p_s <= 1.0:
        raise ValueError(f"sequence error probability {p_s} outside [0, 1]")
    if k_d < 1:
        raise ValueError("a segment carries at least one data symbol")
    return SepPrediction(p_s, p_s / (0.5 * (1 + k_d)), p_s / k_d, p_s, method)


# ---------------------------------------------------------------------------
# Conditional model
# ---------------------------------------------------------------------------

def pair_stats(h_a: complex, h_b: complex, noise_var: float) -> PairStats:
    """Gaussian model of the pair product for BPSK cells carrying +1.

    The variance counts every noise term of (H_a + w_a) conj(H_b + w_b),
    including the noise-by-noise product.
    """
    mu = h_a.real * h_b.real + h_a.imag * h_b.imag
    var = noise_var * (abs(h_a) ** 2 + abs(h_b) ** 2 + 2.0 * noise_var)
    return PairStats(mu, var)


def _pair_q(ps: PairStats, scale: float = 1.0, q=q_exact) -> float:
    """Pair error probability; a negative mean flips the tail (error above one half)."""
    if ps.mu_sp == 0:
        return 0.5
    x = math.sqrt(2.0 * scale * abs(ps.mu_sp) / ps.sigma_sp_sq)
    if ps.mu_sp < 0:
        return 1.0 - float(q_exact(x))
    return float(q(x))


def sep_conditional(h, noise_var: float, layout: SegmentLayout) -> float:
    """Sequence error probability for a fixed channel under the pair-product model.

    Single-sided segments multiply K-1 pair success probabilities. Double-sided
    segments use one edge factor with the sqrt(2) gain applied to the average of
    the two edge pairs, times the K-3 interior pairs.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.shape != (layout.k,):
        raise ValueError("channel length must equal the segment length")
    if not noise_var > 0:
        raise ValueError("noise variance must be positive")
    pairs = [pair_stats(h[v], h[v + 1], noise_var) for v in range(layout.k - 1)]
    if layout.mode == "SS":
        prob_ok = math.prod(1.0 - _pair_q(p) for p in pairs)
    else:
        first, last = pairs[0], pairs[-1]
        edge = PairStats(0.5 * (first.mu_sp + last.mu_sp), 0.5 * (first.sigma_sp_sq + last.sigma_sp_sq))
        prob_ok = (1.0 - _pair_q(edge, SQRT2)) * math.prod(1.0 - _pair_q(p) for p in pairs[1:-1])
    return 1.0 - prob_ok


# ---------------------------------------------------------------------------
# Flat-fading averages by quadrature
# ---------------------------------------------------------------------------

def _conditional_flat(a: np.ndarray, noise_var: float, k: int, mode: str, n_branches: int,
                      q: Callable) -> np.ndarray:
    """Conditional SEP given the summed branch power a (flat fading)."""
    x2 = a / (noise_var * (n_branches * noise_var + a))
    if mode == "SS":
        return 1.0 - (1.0 - q(np.sqrt(x2))) ** (k - 1)
    edge = 1.0 - q(np.sqrt(SQRT2 * x2))
    return 1.0 - edge * (1.0 - q(np.sqrt(x2))) ** (k - 3)


def sep_flat_quadrature(k: int, snr, mode: str = "SS", n_branches: int = 1,
                        q: str = "exact", rel_tol: float = 1e-10) -> float:
    """Average the flat-fading conditional SEP over the Gamma(n_branches, 1) power density.

    ``q`` selects the exact Gaussian tail or the approximation
    exp(-x^2/2)/sqrt(2 pi (x^2+1)).
    """
    gamma = _gamma(snr)
    mode = mode.upper()
    if (mode == "SS" and k < 2) or (mode == "DS" and k < 3):
        raise ValueError("segment too short for the requested mode")
    qf = {"exact": q_exact, "approx": q_approx}[q]
    nv = 0.5 / gamma
    norm = math.gamma(n_branches)

    def integrand(a):
        return _conditional_flat(a, nv, k, mode, n_branches, qf) * a ** (n_branches - 1) * np.exp(-a) / norm

    # the conditional SEP changes on the scale n sigma^4 and the density on the scale 1
    lo = n_branches * nv * nv * 1e-4
    hi = 64.0 * k * n_branches
    breaks = [0.0] + list(np.geomspace(lo, hi, int(4 * math.log10(hi / lo)) + 2))
    return integrate_pieces(integrand, breaks, rel_tol=rel_tol)


# ---------------------------------------------------------------------------
# Reference closed forms
# ---------------------------------------------------------------------------

def _exp_e1(x: float) -> float:
    """exp(x) E1(x) without overflow for large x."""
    if x > 700:
        # asymptotic series, accurate to double precision this far out
        s, term = 1.0, 1.0
        for n in range(1, 20):
            term *= -n / x
            s += term
        return s / x
    return math.exp(x) * float(exp_integral_e1(x))


def closed_form_ss_k3(snr) -> float:
    g = _gamma(snr)
    z = (1.0 / (2.0 * g)) * (1.0 / g + 1.0)
    return z / math.pi * _exp_e1(z + 1.0)


def closed_form_ss_k7(snr) -> float:
    g = _gamma(snr)
    z = (1.0 / (2.0 * g)) * (1.0 / (4.0 * g) + 1.0)
    return z / (64.0 * math.pi ** 3) * ((2.0 * z + 6.0) ** 2 * _exp_e1(z + 3.0) - 4.0 * (z + 1.0))


def closed_form_ds_k3(snr) -> float:
    g = _gamma(snr)
    ups = math.sqrt(8.0 * g + SQRT2 * (4.0 + 1.0 / g))
    return (ups / 2.0 - SQRT2) / ups


def _omega1(g: float) -> float:
    return 1.0 + SQRT2 / (4.0 * g) * (1.0 + 1.0 / (4.0 * g))


def closed_form_ds_k4(snr) -> float:
    g = _gamma(snr)
    o1 = _omega1(g)
    return (o1 - 1.0) * _exp_e1(o1) / (8.0 * math.pi * g)


def closed_form_ds_k6(snr) -> float:
    g = _gamma(snr)
    o1 = _omega1(g)
    o2 = 2.0 + SQRT2 / g * (8.0 + 1.0 / (32.0 * g))
    e1 = float(exp_integral_e1(o2))
    return (o1 - 1.0) / (4.0 * math.pi ** 2) * (1.0 - ((o1 - 1.0) * math.exp(o2) + 2.0) * e1)


def closed_form_simo_n2_k2(snr) -> float:
    """Reference two-branch, two-cell expression. Overflows to -inf once
    exp(2 + gamma) exceeds double range."""
    g = _gamma(snr)
    kap = math.sqrt(2.0 + g)
    try:
        big = math.exp(kap * kap)
    except OverflowError:
        return float("-inf")
    return 0.5 + float(q_exact(kap / math.sqrt(g))) * (2.0 * g * (g / SQRT2 + 2.0) - big) \
        - g * kap / math.sqrt(2.0 * math.pi)


CLOSED_FORMS: dict[tuple[str, int, int], Callable[[float], float]] = {
    ("SS", 3, 1): closed_form_ss_k3,
    ("SS", 7, 1): closed_form_ss_k7,
    ("DS", 3, 1): closed_form_ds_k3,
    ("DS", 4, 1): closed_form_ds_k4,
    ("DS", 6, 1): closed_form_ds_k6,
    ("SS", 2, 2): closed_form_simo_n2_k2,
}


# ---------------------------------------------------------------------------
# Exact differential-detection results
# ---------------------------------------------------------------------------

def sep_dpsk_diversity(n_branches: int, snr) -> float:
    """Error probability of binary differential detection with n-branch
    post-detection combining in Rayleigh fading (per-branch SNR gamma).

    A two-cell single-pilot segment is decided by the sign of
    sum_b Re{r_b0 conj(r_b1)}, which is exactly this detector.
    """
    g = _gamma(snr)
    n = int(n_branches)
    if n < 1:
        raise ValueError("at least one branch")
    mu = g / (1.0 + g)
    total = 0.0
    for k in range(n):
        b_k = sum(math.comb(2 * n - 1, i) for i in range(n - k)) / math.factorial(k)
        total += b_k * math.factorial(n - 1 + k) * mu ** k
    return total / (2.0 ** (2 * n - 1) * math.factorial(n - 1) * (1.0 + g) ** n)


def ber_coherent_bpsk(snr, n_branches: int = 1) -> float:
    """Coherent BPSK with maximum-ratio combining over n Rayleigh branches."""
    g = _gamma(snr)
    mu = math.sqrt(g / (1.0 + g))
    n = int(n_branches)
    return ((1.0 - mu) / 2.0) ** n * sum(math.comb(n - 1 + k, k) * ((1.0 + mu) / 2.0) ** k
                                         for k in range(n))


# ---------------------------------------------------------------------------
# Public predictors
# ---------------------------------------------------------------------------

def sep_ss_flat(k: int, snr, q: str = "exact") -> SepPrediction:
    """Single-pilot segment of length k in flat Rayleigh fading.

    k=2 uses 1/(2(1+gamma)); k=3 and k=7 use the reference closed forms;
    other lengths average the conditional model numerically.
    """
    if k < 2:
        raise ValueError("single-sided segments need k >= 2")
    g = _gamma(snr)
    if k == 2:
        return ber_from_sep(1.0 / (2.0 * (g + 1.0)), 1, "closed-form")
    if ("SS", k, 1) in CLOSED_FORMS:
        return ber_from_sep(CLOSED_FORMS[("SS", k, 1)](g), k - 1, "closed-form")
    return ber_from_sep(sep_flat_quadrature(k, g, "SS", 1, q), k - 1, "quadrature")


def sep_ds_flat(k: int, snr, q: str = "exact") -> SepPrediction:
    """Two-pilot segment of length k in flat Rayleigh fading (reference closed
    forms for k in {3, 4, 6}, quadrature otherwise). For k=3 the single data
    bit gives P_B = P_S."""
    if k < 3:
        raise ValueError("double-sided segments need k >= 3")
    g = _gamma(snr)
    if ("DS", k, 1) in CLOSED_FORMS:
        return ber_from_sep(CLOSED_FORMS[("DS", k, 1)](g), k - 2, "closed-form")
    return ber_from_sep(sep_flat_quadrature(k, g, "DS", 1, q), k - 2, "quadrature")


def sep_simo_flat(n_branches: int, k: int, snr, q: str = "exact") -> SepPrediction:
    """Single-pilot segment with n independent flat-fading receive branches.

    One branch defers to :func:`sep_ss_flat`. Two-cell segments use the exact
    combined differential-detection result for any branch count; longer
    segments average the conditional model over the Gamma power density.
    The reference two-branch expression is available separately as
    :func:`closed_form_simo_n2_k2`.
    """
    if n_branches < 1 or k < 2:
        raise ValueError("need n_branches >= 1 and k >= 2")
    if n_branches == 1:
        return sep_ss_flat(k, snr, q)
    g = _gamma(snr)
    if k == 2:
        return ber_from_sep(sep_dpsk_diversity(n_branches, g), 1, "closed-form")
    return ber_from_sep(sep_flat_quadrature(k, g, "SS", n_branches, q), k - 1, "quadrature")


def predict(k: int, mode: str, n_branches: int, snr, q: str = "exact") -> SepPrediction:
    mode = mode.upper()
    if mode == "DS":
        if n_branches != 1:
            return ber_from_sep(sep_flat_quadrature(k, snr, "DS", n_branches, q), k - 2, "quadrature")
        return sep_ds_flat(k, snr, q)
    return sep_simo_flat(n_branches, k, snr, q)
