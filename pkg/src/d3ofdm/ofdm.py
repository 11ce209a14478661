"""Constellations, pilot layouts and the OFDM transmit/receive chain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .numerics import as_generator, fft, sample_complex_gaussian


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------

def _gray_to_binary(g: np.ndarray) -> np.ndarray:
    b = g.copy()
    shift = g >> 1
    while np.any(shift):
        b ^= shift
        shift >>= 1
    return b


def _axis_levels(bits: np.ndarray, m: int) -> np.ndarray:
    """Gray-coded PAM levels; the all-zero word maps to the largest positive level."""
    word = np.zeros(bits.shape[0], dtype=np.int64)
    for i in range(m):
        word = (word << 1) | bits[:, i]
    pos = _gray_to_binary(word)
    n_levels = 1 << m
    return (n_levels - 1) - 2.0 * pos


@dataclass(frozen=True)
class Constellation:
    """Gray-mapped PSK/QAM alphabet with unit average energy.

    Point ``i`` carries the bit pattern of ``i`` written MSB first, so
    ``bit_table[i]`` is its label. For the square QAM maps the first half of
    the label selects the in-phase level and the second half the quadrature
    level.
    """

    name: str
    points: np.ndarray = field(repr=False)
    bits_per_symbol: int

    @property
    def size(self) -> int:
        return self.points.size

    @cached_property
    def bit_table(self) -> np.ndarray:
        idx = np.arange(self.size)
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((idx[:, None] >> shifts) & 1).astype(np.uint8)

    @property
    def is_constant_modulus(self) -> bool:
        return bool(np.allclose(np.abs(self.points), np.abs(self.points[0])))

    @property
    def gray_map(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(b) for b in row): i for i, row in enumerate(self.bit_table)}


def _make_constellation(name: str) -> Constellation:
    key = name.upper()
    if key == "BPSK":
        return Constellation("BPSK", np.array([1.0 + 0j, -1.0 + 0j]), 1)
    orders = {"QPSK": 4, "4QAM": 4, "16QAM": 16, "64QAM": 64}
    if key not in orders:
        raise ValueError(f"unknown constellation {name!r}")
    m = orders[key]
    b = int(math.log2(m))
    half = b // 2
    idx = np.arange(m)
    bits = ((idx[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.int64)
    i_lvl = _axis_levels(bits[:, :half], half)
    q_lvl = _axis_levels(bits[:, half:], half)
    pts = i_lvl + 1j * q_lvl
    pts = pts / math.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation("QPSK" if m == 4 else key, pts, b)


_CACHE: dict[str, Constellation] = {}


def constellation(name: str) -> Constellation:
    key = name.upper()
    if key not in _CACHE:
        _CACHE[key] = _make_constellation(key)
    return _CACHE[key]


def map_bits(bits, c: Constellation) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % c.bits_per_symbol:
        raise ValueError(f"{bits.shape[-1]} bits do not fill whole {c.name} symbols")
    grouped = bits.reshape(bits.shape[:-1] + (-1, c.bits_per_symbol))
    weights = 1 << np.arange(c.bits_per_symbol - 1, -1, -1)
    return c.points[grouped @ weights]


def nearest_index(symbols, c: Constellation) -> np.ndarray:
    """Index of the closest constellation point (ties go to the lower index)."""
    s = np.asarray(symbols, dtype=np.complex128)
    d = np.abs(s[..., None] - c.points) ** 2
    return np.argmin(d, axis=-1)


def indices_to_bits(indices, c: Constellation) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    return c.bit_table[idx].reshape(idx.shape[:-1] + (-1,)) if idx.ndim else c.bit_table[idx]


def demap(symbols, c: Constellation) -> np.ndarray:
    """Hard decision back to bits."""
    return indices_to_bits(nearest_index(symbols, c), c)


# ---------------------------------------------------------------------------
# Layouts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentLayout:
    """A run of ``k`` subcarriers anchored by one (single-sided, "SS") or two
    (double-sided, "DS") pilots."""

    k: int
    mode: str = "SS"
    pilot_value: complex = 1.0 + 0j

    def __post_init__(self):
        mode = self.mode.upper()
        if mode not in ("SS", "DS"):
            raise ValueError("segment mode must be 'SS' or 'DS'")
        object.__setattr__(self, "mode", mode)
        if mode == "SS" and self.k < 2:
            raise ValueError("single-sided segments need k >= 2")
        if mode == "DS" and self.k < 3:
            raise ValueError("double-sided segments need k >= 3")

    @property
    def pilot_positions(self) -> tuple[int, ...]:
        return (0,) if self.mode == "SS" else (0, self.k - 1)

    @property
    def k_d(self) -> int:
        return self.k - len(self.pilot_positions)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.k,)

    @cached_property
    def pilot_mask(self) -> np.ndarray:
        m = np.zeros(self.k, dtype=bool)
        m[list(self.pilot_positions)] = True
        return m


DEFAULT_RB_PILOTS = ((1, 1), (1, 7), (5, 4), (5, 10), (8, 1), (8, 7), (12, 4), (12, 10))


@dataclass(frozen=True)
class ResourceBlockLayout:
    """12 x 14 resource block: rows are subcarriers, columns OFDM symbols.

    ``pilot_cells`` are 1-indexed (row, col) pairs.
    """

    pilot_cells: tuple[tuple[int, int], ...] = DEFAULT_RB_PILOTS
    rows: int = 12
    cols: int = 14
    pilot_value: complex = 1.0 + 0j

    def __post_init__(self):
        cells = tuple((int(r), int(c)) for r, c in self.pilot_cells)
        if len(set(cells)) != len(cells) or not cells:
            raise ValueError("pilot cells must be distinct and non-empty")
        for r, c in cells:
            if not (1 <= r <= self.rows and 1 <= c <= self.cols):
                raise ValueError(f"pilot cell {(r, c)} outside the {self.rows}x{self.cols} block")
        object.__setattr__(self, "pilot_cells", cells)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def pilot_rows(self) -> tuple[int, ...]:
        return tuple(sorted({r for r, _ in self.pilot_cells}))

    @property
    def pilot_cols(self) -> tuple[int, ...]:
        return tuple(sorted({c for _, c in self.pilot_cells}))

    @cached_property
    def pilot_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        for r, c in self.pilot_cells:
            m[r - 1, c - 1] = True
        return m

    @property
    def n_data(self) -> int:
        return self.rows * self.cols - len(self.pilot_cells)


@dataclass(frozen=True)
class FrameLayout:
    """Segments tiled across an ``n``-subcarrier OFDM symbol.

    Single-sided segments are placed back to back; double-sided segments share
    their boundary pilots. Subcarriers left over at the top of the band carry
    pilots.
    """

    n: int
    segment: SegmentLayout

    @cached_property
    def segment_starts(self) -> np.ndarray:
        step = self.segment.k if self.segment.mode == "SS" else self.segment.k - 1
        count = (self.n - (0 if self.segment.mode == "SS" else 1)) // step
        return np.arange(count) * step

    @cached_property
    def segment_index(self) -> np.ndarray:
        """(n_segments, k) subcarrier indices of each segment."""
        return self.segment_starts[:, None] + np.arange(self.segment.k)

    @cached_property
    def pilot_mask(self) -> np.ndarray:
        m = np.ones(self.n, dtype=bool)
        seg = self.segment_index
        m[seg[:, ~self.segment.pilot_mask].ravel()] = False
        return m

    @property
    def shape(self) -> tuple[int]:
        return (self.n,)

    @property
    def pilot_value(self) -> complex:
        return self.segment.pilot_value

    @property
    def n_data(self) -> int:
        return int((~self.pilot_mask).sum())


def build_frame(data, layout) -> np.ndarray:
    """Place pilots and fill the remaining cells with ``data`` in C order.

    ``data`` may carry leading batch axes; its last axis must equal the
    layout's data-cell count.
    """
    data = np.asarray(data, dtype=np.complex128)
    mask = layout.pilot_mask
    n_data = int((~mask).sum())
    if data.shape[-1] != n_data:
        raise ValueError(f"layout holds {n_data} data symbols, got {data.shape[-1]}")
    grid = np.full(data.shape[:-1] + mask.shape, layout.pilot_value, dtype=np.complex128)
    grid[..., ~mask] = data
    return grid


def extract_data(grid, layout) -> np.ndarray:
    return np.asarray(grid)[..., ~layout.pilot_mask]


# ---------------------------------------------------------------------------
# OFDM chain
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OfdmParams:
    n: int = 512
    n_cp: int = 64
    sample_rate_hz: float = 7.68e6
    subcarrier_spacing_hz: float = 15e3

    def __post_init__(self):
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError("N must be a power of two")
        if not 0 <= self.n_cp < self.n:
            raise ValueError("cyclic prefix must be shorter than the symbol")

    @property
    def n_t(self) -> int:
        return self.n + self.n_cp

    @property
    def symbol_period_s(self) -> float:
        return self.n_t / self.sample_rate_hz


def transmit(d, p: OfdmParams) -> np.ndarray:
    """Unitary IFFT followed by cyclic-prefix insertion."""
    d = np.asarray(d, dtype=np.complex128)
    if d.shape[-1] != p.n:
        raise ValueError(f"expected {p.n} subcarriers, got {d.shape[-1]}")
    x = fft(d, inverse=True)
    return np.concatenate([x[..., p.n - p.n_cp:], x], axis=-1)


def propagate(x, taps, delays, noise_var: float, rng=None, n_cp: int | None = None) -> np.ndarray:
    """Pass through a quasi-static multipath channel and add white noise.

    ``noise_var`` is the per-component variance; the complex noise has
    E|w|^2 = 2 * noise_var. The output keeps the input length (the tail that
    would spill into the next symbol is dropped).
    """
    x = np.asarray(x, dtype=np.complex128)
    taps = np.asarray(taps, dtype=np.complex128)
    delays = tuple(int(m) for m in delays)
    if n_cp is not None and max(delays) > n_cp:
        raise ValueError("channel delay spread exceeds the cyclic prefix")
    y = np.zeros(np.broadcast_shapes(x.shape, taps.shape[:-1] + (1,)), dtype=np.complex128)
    length = x.shape[-1]
    for i, m in enumerate(delays):
        if m < length:
            y[..., m:] += taps[..., i, None] * x[..., : length - m]
    if noise_var > 0:
        y = y + sample_complex_gaussian(as_generator(rng), 2.0 * noise_var, y.shape)
    return y


def receive(y, p: OfdmParams) -> np.ndarray:
    """Drop the cyclic prefix and apply the unitary FFT."""
    y = np.asarray(y, dtype=np.complex128)
    if y.shape[-1] != p.n_t:
        raise ValueError(f"expected {p.n_t} samples, got {y.shape[-1]}")
    return fft(y[..., p.n_cp:])


def apply_channel_freq(d, h, noise_var: float, rng=None) -> np.ndarray:
    """Frequency-domain shortcut r = H d + w with E|w|^2 = 2 * noise_var."""
    d = np.asarray(d, dtype=np.complex128)
    r = np.asarray(h) * d
    if noise_var > 0:
        r = r + sample_complex_gaussian(as_generator(rng), 2.0 * noise_var, r.shape)
    return r


def noise_var_for_snr(snr_db: float) -> float:
    """Per-component noise variance for average SNR E|H d|^2 / (2 sigma^2) with unit powers."""
    return 0.5 * 10.0 ** (-snr_db / 10.0)
