"""Multipath Rayleigh channels: tap profiles, frequency responses, Doppler
evolution and the adjacent-subcarrier correlation statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import as_generator, bessel_j0, fft, sample_complex_gaussian

SPEED_OF_LIGHT = 3.0e8


@dataclass(frozen=True)
class TapProfile:
    """Sample-spaced power delay profile.

    ``powers`` are the mean tap energies E|h_m|^2; they are normalised to sum
    to one on construction.
    """

    delays: tuple[int, ...]
    powers: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        delays = tuple(int(d) for d in self.delays)
        powers = np.asarray(self.powers, dtype=float)
        if len(delays) == 0 or len(delays) != powers.size:
            raise ValueError("delays and powers must be non-empty and equally long")
        if delays[0] < 0 or any(b <= a for a, b in zip(delays, delays[1:])):
            raise ValueError("delays must be non-negative and strictly increasing")
        if np.any(powers <= 0) or not np.all(np.isfinite(powers)):
            raise ValueError("tap powers must be positive")
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "powers", tuple(float(p) for p in powers / powers.sum()))

    @property
    def max_delay(self) -> int:
        return self.delays[-1]

    def check_prefix(self, n_cp: int) -> None:
        if self.max_delay > n_cp:
            raise ValueError(f"profile '{self.name}' spans {self.max_delay} samples, "
                             f"longer than the cyclic prefix ({n_cp})")

    def rms_delay(self) -> float:
        d = np.asarray(self.delays, dtype=float)
        p = np.asarray(self.powers)
        mean = float(p @ d)
        return math.sqrt(float(p @ (d - mean) ** 2))


PROFILES: dict[str, TapProfile] = {
    "flat": TapProfile((0,), (1.0,), "flat"),
    "tux6": TapProfile((0, 2, 3, 9, 13, 29), (0.2, 0.398, 0.2, 0.1, 0.063, 0.039), "tux6"),
    "tux9": TapProfile(tuple(range(9)),
                       (0.269, 0.174, 0.289, 0.117, 0.023, 0.058, 0.036, 0.026, 0.008), "tux9"),
}


def get_profile(spec) -> TapProfile:
    """Resolve a profile from a name, a ``{"name": ...}`` or a ``{"delays", "powers"}`` mapping."""
    if isinstance(spec, TapProfile):
        return spec
    if isinstance(spec, str):
        spec = {"name": spec}
    if "name" in spec and "delays" not in spec:
        try:
            return PROFILES[spec["name"]]
        except KeyError:
            raise ValueError(f"unknown channel profile {spec['name']!r}; "
                             f"choose from {sorted(PROFILES)}") from None
    return TapProfile(tuple(spec["delays"]), tuple(spec["powers"]), spec.get("name", "custom"))


def cfr_from_taps(taps: np.ndarray, delays, n: int, subcarriers=None) -> np.ndarray:
    """Channel frequency response H_v = sum_m h_m exp(-j 2 pi m v / n).

    ``taps`` has shape (..., n_taps). When ``subcarriers`` is None all ``n``
    bins are returned; otherwise only the requested indices (any shape that
    broadcasts against the leading axes of ``taps`` plus a trailing axis).
    """
    taps = np.asarray(taps, dtype=np.complex128)
    delays = np.asarray(delays, dtype=np.int64)
    if subcarriers is None:
        padded = np.zeros(taps.shape[:-1] + (n,), dtype=np.complex128)
        padded[..., delays] = taps
        return fft(padded) * math.sqrt(n)
    v = np.asarray(subcarriers)
    phase = np.exp(-2j * np.pi * np.multiply.outer(v, delays) / n)
    return (phase * taps[..., None, :]).sum(-1)


@dataclass
class ChannelRealization:
    taps: np.ndarray
    delays: tuple[int, ...]
    cfr: np.ndarray
    block_index: int = 0
    powers: tuple[float, ...] | None = None

    @property
    def n(self) -> int:
        return self.cfr.shape[-1]


def sample_taps(profile: TapProfile, rng, size=()) -> np.ndarray:
    """Independent CN(0, p_m) taps with shape ``size + (n_taps,)``."""
    gen = as_generator(rng)
    size = (size,) if isinstance(size, int) else tuple(size)
    unit = sample_complex_gaussian(gen, 1.0, size + (len(profile.delays),))
    return unit * np.sqrt(np.asarray(profile.powers))


def sample_realization(profile: TapProfile, rng, n: int = 512, block_index: int = 0) -> ChannelRealization:
    taps = sample_taps(profile, rng)
    return ChannelRealization(taps, profile.delays, cfr_from_taps(taps, profile.delays, n),
                              block_index, profile.powers)


def freq_correlation(profile: TapProfile, n: int) -> complex:
    """Correlation between adjacent subcarriers, sum_m p_m exp(j 2 pi m / n)."""
    d = np.asarray(profile.delays)
    return complex(np.sum(np.asarray(profile.powers) * np.exp(2j * np.pi * d / n)))


def freq_difference(profile: TapProfile, n: int) -> complex:
    """Power-weighted adjacent-subcarrier difference sum_m p_m (1 - exp(-j 2 pi m / n)).

    The tap-wise expression for H_v - H_{v+1} averages to zero for zero-mean
    taps, so the taps are replaced by their mean energies. The result equals
    ``1 - conj(freq_correlation)`` and vanishes for a single tap at delay 0.
    """
    d = np.asarray(profile.delays)
    return complex(np.sum(np.asarray(profile.powers) * (1.0 - np.exp(-2j * np.pi * d / n))))


def freq_difference_rms(profile: TapProfile, n: int) -> float:
    """sqrt(E|H_v - H_{v+1}|^2)."""
    d = np.asarray(profile.delays)
    return math.sqrt(float(np.sum(np.asarray(profile.powers) * np.abs(1.0 - np.exp(-2j * np.pi * d / n)) ** 2)))


@dataclass(frozen=True)
class MobilityModel:
    """Terminal motion parameters. ``symbol_period_s`` is the spacing between
    successive channel states (one OFDM symbol including its prefix by default)."""

    speed_mps: float
    carrier_hz: float = 1.9e9
    symbol_period_s: float = 75e-6
    oscillator_count: int = 16

    def __post_init__(self):
        if self.oscillator_count < 8:
            raise ValueError("sum-of-sinusoids order must be at least 8")
        if self.speed_mps < 0 or self.carrier_hz <= 0 or self.symbol_period_s <= 0:
            raise ValueError("speed must be >= 0, carrier and period > 0")

    @classmethod
    def from_kmh(cls, speed_kmh: float, **kw) -> "MobilityModel":
        return cls(speed_kmh / 3.6, **kw)

    @property
    def doppler_hz(self) -> float:
        return self.speed_mps / SPEED_OF_LIGHT * self.carrier_hz


def time_correlation(model: MobilityModel, period_s: float | None = None) -> float:
    """J0(2 pi f_d T); ``period_s`` overrides the model's symbol period."""
    t = model.symbol_period_s if period_s is None else period_s
    return float(bessel_j0(2.0 * math.pi * model.doppler_hz * t))


def jakes_trajectory(taps0: np.ndarray, powers, model: MobilityModel, steps: int, rng) -> np.ndarray:
    """Evolve tap vectors over ``steps`` further symbols.

    A sum-of-sinusoids process g with random arrival angles and phases has
    autocorrelation p J0(2 pi f_d t). The returned trajectory is
    ``rho_k h0 + g(k) - rho_k g(0)``, which starts exactly at ``taps0`` and
    keeps both the marginal tap power and the J0 autocorrelation at every lag.

    Returns an array of shape ``taps0.shape[:-1] + (steps + 1, n_taps)`` whose
    index 0 along the step axis is ``taps0``.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    gen = as_generator(rng)
    taps0 = np.asarray(taps0, dtype=np.complex128)
    powers = np.asarray(powers, dtype=float)
    k = np.arange(steps + 1)
    t = k * model.symbol_period_s
    rho = np.asarray(bessel_j0(2.0 * math.pi * model.doppler_hz * t), dtype=float)
    s = model.oscillator_count
    shape = taps0.shape + (s,)
    theta = gen.uniform(0.0, 2.0 * math.pi, shape)
    phi = gen.uniform(0.0, 2.0 * math.pi, shape)
    omega = 2.0 * math.pi * model.doppler_hz * np.cos(theta)
    # phases: (..., taps, steps+1, oscillators)
    phase = omega[..., None, :] * t[:, None] + phi[..., None, :]
    g = np.sqrt(powers / s)[:, None] * np.exp(1j * phase).sum(-1)
    traj = rho * taps0[..., None] + g - rho * g[..., :1]
    traj[..., 0] = taps0
    return np.swapaxes(traj, -1, -2)


def evolve(realization: ChannelRealization, model: MobilityModel, steps: int,
           rng) -> list[ChannelRealization]:
    """Channel states for the ``steps`` symbols following ``realization``.

    The realization must carry its profile powers (as produced by
    :func:`sample_realization`) so the Doppler process is scaled per tap.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if realization.powers is None:
        raise ValueError("realization has no profile powers; sample it with sample_realization")
    traj = jakes_trajectory(realization.taps, realization.powers, model, steps, rng)
    n = realization.n
    out = []
    for k in range(1, steps + 1):
        taps = traj[..., k, :]
        out.append(ChannelRealization(taps, realization.delays,
                                      cfr_from_taps(taps, realization.delays, n),
                                      realization.block_index + k, realization.powers))
    return out
