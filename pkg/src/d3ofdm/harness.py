"""Monte Carlo experiment runner.

A configuration fixes the link (channel, constellation, pilot layout,
receive branches, optional coding) and a list of detectors. For each SNR
point, trials are generated from independent random streams keyed by
``(seed, snr_index, trial_index)`` and evaluated in fixed-size rounds, so
the stopping point and every count are independent of the worker count.

Engines:

* ``segment``: flat fading with an independent fade per segment.
* ``frame``: whole OFDM symbols through a multipath channel.
* ``rb``: 12 x 14 resource blocks with the channel evolving over time.
* ``coded``: convolutional coding, optional block interleaving and OFDM
  transmission of the coded stream.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
from scipy.stats import beta

from . import analysis
from .channel import (MobilityModel, TapProfile, cfr_from_taps, get_profile,
                      jakes_trajectory, sample_taps)
from .detectors import (DETECTOR_NAMES, coherent_estimated, coherent_mld, coherent_rb,
                        d3_bruteforce, d3_coded, d3_viterbi, detect_resource_block,
                        detect_segments, glrt_mlsd, ls_estimate_interpolate)
from .fec import BlockInterleaver, ConvCode, conv_encode, viterbi_decode_hard
from .numerics import RngStream, sample_complex_gaussian
from .ofdm import (Constellation, FrameLayout, OfdmParams, ResourceBlockLayout, SegmentLayout,
                   build_frame, constellation, indices_to_bits, noise_var_for_snr, receive,
                   transmit, propagate)
from .scenarios import SCENARIOS, scenario

CSV_HEADER = ("detector", "snr_db", "bits", "bit_errors", "ber", "ci_low", "ci_high",
              "seq_errors", "seqs", "ser")

_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LayoutConfig:
    kind: str = "segment"
    mode: str = "SS"
    k: int = 2
    pilot_cells: tuple[tuple[int, int], ...] | None = None
    order: str = "rows-first"

    def segment(self) -> SegmentLayout:
        return SegmentLayout(self.k, self.mode)

    def resource_block(self) -> ResourceBlockLayout:
        if self.pilot_cells is None:
            return ResourceBlockLayout()
        return ResourceBlockLayout(self.pilot_cells)


@dataclass(frozen=True)
class FecConfig:
    enabled: bool = False
    interleaver: bool = True
    block_bits: int = 256


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"
    name: str | None = None
    dat: bool = True
    overwrite: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    ofdm: OfdmParams
    channel: TapProfile
    constellation: str
    layout: LayoutConfig
    detectors: tuple[str, ...]
    snr_db: tuple[float, ...]
    engine: str
    branches: int = 1
    speed_kmh: float = 0.0
    carrier_hz: float = 1.9e9
    min_bits: int = 100_000
    min_errors: int = 100
    max_symbols: int = 100_000
    batch: int = 0
    round_trials: int = 4
    seed: int = 0
    domain: str = "freq"
    fec: FecConfig = field(default_factory=FecConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    codebook_generator: tuple[tuple[int, ...], ...] | None = None

    @property
    def trial_batch(self) -> int:
        return self.batch or _DEFAULT_BATCH[self.engine]


_DEFAULT_BATCH = {"segment": 20_000, "frame": 64, "rb": 16, "coded": 1}

_TOP_KEYS = {"scenario", "n", "n_cp", "channel", "constellation", "layout", "detectors", "snr_db",
             "engine", "branches", "mobility", "min_bits", "min_errors", "max_symbols", "batch",
             "round_trials", "seed", "domain", "fec", "output", "codebook_generator"}
_LAYOUT_KEYS = {"kind", "mode", "k", "pilot_cells", "order"}
_FEC_KEYS = {"enabled", "interleaver", "block_bits"}
_OUTPUT_KEYS = {"dir", "name", "dat", "overwrite"}
_MOBILITY_KEYS = {"speed_kmh", "carrier_hz"}

_ENGINE_DETECTORS = {
    "segment": {"coherent", "coherent-l", "coherent-s", "glrt", "d3-bf", "d3-va", "d3-simo",
                "d3-coded"},
    "frame": {"coherent", "coherent-l", "coherent-s", "glrt", "d3-bf", "d3-va", "d3-simo"},
    "rb": {"coherent", "coherent-l", "coherent-s", "d3-rb"},
    "coded": {"coherent", "coherent-l", "coherent-s", "glrt", "d3-bf", "d3-va", "d3-simo"},
}


class ConfigError(ValueError):
    pass


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _parse_snr(values) -> tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("snr_db must be a non-empty list")
    out = []
    for v in values:
        if isinstance(v, str) and v.lower() in ("inf", "noiseless"):
            out.append(math.inf)
        else:
            out.append(float(v))
    return tuple(out)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a JSON-style dictionary and build an :class:`ExperimentConfig`.

    When ``scenario`` names a built-in scenario, the dictionary overrides it.
    Unknown keys anywhere are rejected.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    name = raw.get("scenario", "custom")
    d = _merge(scenario(name), raw) if name in SCENARIOS else dict(raw)
    for key in ("channel", "layout", "detectors", "snr_db"):
        if key not in d:
            raise ConfigError(f"missing required key {key!r}")

    lay = d["layout"]
    if not isinstance(lay, dict):
        raise ConfigError("layout must be an object")
    _reject_unknown(lay, _LAYOUT_KEYS, "layout")
    cells = lay.get("pilot_cells")
    layout = LayoutConfig(kind=lay.get("kind", "segment"), mode=str(lay.get("mode", "SS")).upper(),
                          k=int(lay.get("k", 2)),
                          pilot_cells=None if cells is None else tuple(tuple(int(x) for x in c)
                                                                       for c in cells),
                          order=lay.get("order", "rows-first"))
    if layout.kind not in ("segment", "rb"):
        raise ConfigError("layout.kind must be 'segment' or 'rb'")
    if layout.order not in ("rows-first", "cols-first"):
        raise ConfigError("layout.order must be 'rows-first' or 'cols-first'")

    fec_raw = d.get("fec", {}) or {}
    _reject_unknown(fec_raw, _FEC_KEYS, "fec")
    il = fec_raw.get("interleaver", "on")
    if il not in ("on", "off", True, False):
        raise ConfigError("fec.interleaver must be 'on' or 'off'")
    fec = FecConfig(bool(fec_raw.get("enabled", False)), il in ("on", True),
                    int(fec_raw.get("block_bits", 256)))

    out_raw = d.get("output", {}) or {}
    _reject_unknown(out_raw, _OUTPUT_KEYS, "output")
    output = OutputConfig(**out_raw)

    mob = d.get("mobility") or {}
    _reject_unknown(mob, _MOBILITY_KEYS, "mobility")

    if isinstance(d["channel"], dict):
        _reject_unknown(d["channel"], {"name", "delays", "powers"}, "channel")
    try:
        ofdm = OfdmParams(int(d.get("n", 512)), int(d.get("n_cp", 64)))
        profile = get_profile(d["channel"])
        profile.check_prefix(ofdm.n_cp)
        constellation(d.get("constellation", "BPSK"))
        if layout.kind == "segment":
            layout.segment()
        else:
            layout.resource_block()
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    flat = len(profile.delays) == 1

    engine = d.get("engine") or _auto_engine(flat, layout, fec)
    if engine not in _ENGINE_DETECTORS:
        raise ConfigError(f"unknown engine {engine!r}")
    dets = tuple(d["detectors"])
    if not dets:
        raise ConfigError("detector list is empty")
    for det in dets:
        if det not in DETECTOR_NAMES:
            raise ConfigError(f"unknown detector {det!r}")
        if det not in _ENGINE_DETECTORS[engine]:
            raise ConfigError(f"detector {det!r} cannot run on the {engine!r} engine "
                              f"(layout {layout.kind}, fec {'on' if fec.enabled else 'off'})")
    if engine == "segment" and not flat:
        raise ConfigError("the segment engine models flat fading only")
    if engine == "rb" and layout.kind != "rb":
        raise ConfigError("the rb engine needs an rb layout")
    if engine != "rb" and layout.kind == "rb":
        raise ConfigError("rb layouts run on the rb engine")
    if engine == "coded" and constellation(d.get("constellation", "BPSK")).name != "BPSK":
        raise ConfigError("the coded chain maps coded bits onto BPSK")
    gen_rows = d.get("codebook_generator")
    if "d3-coded" in dets:
        if gen_rows is None:
            raise ConfigError("d3-coded needs codebook_generator (binary rows spanning the data cells)")
        g = np.asarray(gen_rows)
        if g.ndim != 2 or g.shape[1] != layout.segment().k_d or not np.isin(g, (0, 1)).all():
            raise ConfigError("codebook_generator must be a binary matrix with k_d columns")
        if d.get("constellation", "BPSK") != "BPSK":
            raise ConfigError("d3-coded supports BPSK only")

    cfg = ExperimentConfig(
        scenario=name, ofdm=ofdm, channel=profile,
        constellation=d.get("constellation", "BPSK"), layout=layout, detectors=dets,
        snr_db=_parse_snr(d["snr_db"]), engine=engine, branches=int(d.get("branches", 1)),
        speed_kmh=float(mob.get("speed_kmh", 0.0)), carrier_hz=float(mob.get("carrier_hz", 1.9e9)),
        min_bits=int(d.get("min_bits", 100_000)), min_errors=int(d.get("min_errors", 100)),
        max_symbols=int(d.get("max_symbols", 100_000)), batch=int(d.get("batch", 0)),
        round_trials=int(d.get("round_trials", 4)), seed=int(d.get("seed", 0)),
        domain=d.get("domain", "freq"), fec=fec, output=output,
        codebook_generator=None if gen_rows is None else tuple(tuple(int(x) for x in r)
                                                               for r in gen_rows))
    if cfg.min_bits < 10_000:
        raise ConfigError("min_bits must be at least 10^4")
    if cfg.branches < 1 or cfg.round_trials < 1 or cfg.max_symbols < 1 or cfg.batch < 0:
        raise ConfigError("branches, round_trials and max_symbols must be positive")
    if cfg.domain not in ("freq", "time"):
        raise ConfigError("domain must be 'freq' or 'time'")
    if cfg.speed_kmh < 0:
        raise ConfigError("speed must be non-negative")
    return cfg


def _auto_engine(flat: bool, layout: LayoutConfig, fec: FecConfig) -> str:
    if fec.enabled:
        return "coded"
    if layout.kind == "rb":
        return "rb"
    return "segment" if flat else "frame"


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)


# ---------------------------------------------------------------------------
# Records and statistics
# ---------------------------------------------------------------------------

@dataclass
class BerRecord:
    detector: str
    snr_db: float
    bits: int
    bit_errors: int
    ber: float
    ci_low: float
    ci_high: float
    seq_errors: int
    seqs: int
    ser: float
    saturated: bool = True
    symbols: float = 0.0


def binomial_interval(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def _record(det: str, snr: float, c: np.ndarray, symbols: float, min_errors: int) -> BerRecord:
    bits, errs, seq_err, seqs = (int(x) for x in c)
    lo, hi = binomial_interval(errs, bits)
    return BerRecord(det, snr, bits, errs, errs / bits if bits else float("nan"), lo, hi,
                     seq_err, seqs, seq_err / seqs if seqs else float("nan"),
                     errs >= min_errors, symbols)


# ---------------------------------------------------------------------------
# Trial engines
# ---------------------------------------------------------------------------

def _bit_errors(est: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-cell bit errors; constellation index bits map one-to-one onto labels."""
    x = np.bitwise_xor(est.astype(np.int64), truth.astype(np.int64))
    out = np.zeros(x.shape, dtype=np.int64)
    while np.any(x):
        out += _POPCOUNT[x & 0xFF]
        x >>= 8
    return out


def _counts(est_idx, true_idx, groups: np.ndarray | None) -> np.ndarray:
    """(bits-equivalent cells, bit errors, sequence errors, sequences)."""
    errs = _bit_errors(np.asarray(est_idx), np.asarray(true_idx))
    if groups is None:
        wrong = errs.reshape(errs.shape[0], -1).any(axis=1)
        return np.array([0, errs.sum(), wrong.sum(), wrong.size])
    n_groups = int(groups.max()) + 1
    flat = errs.reshape(-1, errs.shape[-1])
    per = np.zeros((flat.shape[0], n_groups), dtype=np.int64)
    np.add.at(per, (slice(None), groups), flat)
    return np.array([0, errs.sum(), (per > 0).sum(), per.size])


def _noise(gen, nv: float, shape) -> np.ndarray | float:
    if nv <= 0:
        return 0.0
    return sample_complex_gaussian(gen, 2.0 * nv, shape)


def _noise_var(snr_db: float) -> float:
    return 0.0 if math.isinf(snr_db) else noise_var_for_snr(snr_db)


def _segment_trial(cfg: ExperimentConfig, snr_db: float, gen) -> tuple[dict, float]:
    layout = cfg.layout.segment()
    c = constellation(cfg.constellation)
    s, nb = cfg.trial_batch, cfg.branches
    nv = _noise_var(snr_db)
    data = ~layout.pilot_mask
    bps = c.bits_per_symbol
    codebook = None
    if cfg.codebook_generator is not None:
        g = np.asarray(cfg.codebook_generator, dtype=np.int64)
        info = (np.arange(2 ** g.shape[0])[:, None] >> np.arange(g.shape[0] - 1, -1, -1)) & 1
        words = info @ g % 2
        codebook = np.full((words.shape[0], layout.k), layout.pilot_value, dtype=np.complex128)
        codebook[:, data] = c.points[words]
        msg = gen.integers(0, words.shape[0], s)
        idx = words[msg]
    else:
        idx = gen.integers(0, c.size, (s, layout.k_d))
    seg = np.full((s, layout.k), layout.pilot_value, dtype=np.complex128)
    seg[:, data] = c.points[idx]
    h = sample_complex_gaussian(gen, 1.0, (s, nb, 1))
    r = h * seg[:, None, :] + _noise(gen, nv, (s, nb, layout.k))
    out = {}
    for det in cfg.detectors:
        if det == "d3-coded":
            res = d3_coded(r, codebook, branches=True)
            wrong = res.indices != msg
            info_bits = np.asarray(cfg.codebook_generator).shape[0]
            bit_err = _bit_errors(res.indices, msg).sum()
            out[det] = np.array([s * info_bits, bit_err, wrong.sum(), s])
            continue
        if det == "coherent":
            est = coherent_mld(r[..., data], np.broadcast_to(h, r.shape)[..., data], c,
                               branches=True).indices
        elif det in ("coherent-l", "coherent-s"):
            kind = "linear" if det == "coherent-l" else "spline"
            est = coherent_estimated(r, layout.pilot_mask, layout.pilot_value, c, kind,
                                     branches=True)
        elif det == "d3-bf":
            est = d3_bruteforce(r, layout, c, branches=True).indices
        elif det in ("d3-va", "d3-simo"):
            est = d3_viterbi(r, layout, c, branches=True).indices
        elif det == "glrt":
            est = glrt_mlsd(r, layout, c, branches=True).indices
        else:
            raise ConfigError(f"{det!r} is not available on the segment engine")
        cnt = _counts(est, idx, None)
        cnt[0] = est.size * bps
        out[det] = cnt
    frame = FrameLayout(cfg.ofdm.n, layout)
    return out, s * layout.k_d / frame.n_data


def _frame_front_end(det: str, r, h, frame: FrameLayout, c: Constellation) -> np.ndarray:
    data = ~frame.pilot_mask
    if det == "coherent":
        return coherent_mld(r[..., data], h[..., data], c, branches=True).indices
    if det in ("coherent-l", "coherent-s"):
        kind = "linear" if det == "coherent-l" else "spline"
        return coherent_estimated(r, frame.pilot_mask, frame.pilot_value, c, kind, branches=True)
    if det in ("d3-va", "d3-simo", "d3-bf", "glrt"):
        return detect_segments(r, frame, c, det, branches=True)
    raise ConfigError(f"{det!r} is not a frame detector")


def _ofdm_channel(cfg: ExperimentConfig, grid: np.ndarray, gen, nv: float):
    """Propagate (S, N) frequency-domain frames over independent multipath
    draws; returns received (S, B, N) and the true response (S, B, N)."""
    profile = get_profile(cfg.channel)
    s, nb, n = grid.shape[0], cfg.branches, cfg.ofdm.n
    taps = sample_taps(profile, gen, (s, nb))
    h = cfr_from_taps(taps, profile.delays, n)
    if cfg.domain == "time":
        x = transmit(grid, cfg.ofdm)[:, None, :]
        y = propagate(x, taps, profile.delays, nv, gen, n_cp=cfg.ofdm.n_cp)
        r = receive(y, cfg.ofdm)
    else:
        r = h * grid[:, None, :] + _noise(gen, nv, (s, nb, n))
    return r, h


def _frame_trial(cfg: ExperimentConfig, snr_db: float, gen) -> tuple[dict, float]:
    layout = cfg.layout.segment()
    frame = FrameLayout(cfg.ofdm.n, layout)
    c = constellation(cfg.constellation)
    s = cfg.trial_batch
    nv = _noise_var(snr_db)
    idx = gen.integers(0, c.size, (s, frame.n_data))
    grid = build_frame(c.points[idx], frame)
    r, h = _ofdm_channel(cfg, grid, gen, nv)
    groups = _segment_of_data_cell(frame)
    out = {}
    for det in cfg.detectors:
        est = _frame_front_end(det, r, h, frame, c)
        cnt = _counts(est, idx, groups)
        cnt[0] = est.size * c.bits_per_symbol
        out[det] = cnt
    return out, float(s)


def _segment_of_data_cell(frame: FrameLayout) -> np.ndarray:
    owner = np.full(frame.n, -1, dtype=np.int64)
    seg = frame.segment_index
    data = ~frame.segment.pilot_mask
    owner[seg[:, data].ravel()] = np.repeat(np.arange(seg.shape[0]), data.sum())
    return owner[~frame.pilot_mask]


def _rb_trial(cfg: ExperimentConfig, snr_db: float, gen) -> tuple[dict, float]:
    layout = cfg.layout.resource_block()
    c = constellation(cfg.constellation)
    profile = get_profile(cfg.channel)
    s, nb = cfg.trial_batch, cfg.branches
    nv = _noise_var(snr_db)
    n_rb = cfg.ofdm.n // layout.rows
    n_sub = n_rb * layout.rows
    taps0 = sample_taps(profile, gen, (s, nb))
    if cfg.speed_kmh > 0:
        model = MobilityModel.from_kmh(cfg.speed_kmh, carrier_hz=cfg.carrier_hz,
                                       symbol_period_s=cfg.ofdm.symbol_period_s)
        traj = jakes_trajectory(taps0, profile.powers, model, layout.cols - 1, gen)
    else:
        traj = np.repeat(taps0[..., None, :], layout.cols, axis=-2)
    h = cfr_from_taps(traj, profile.delays, cfg.ofdm.n, np.arange(n_sub))   # (S, B, T, n_sub)
    h = h.reshape(s, nb, layout.cols, n_rb, layout.rows)
    h = np.transpose(h, (0, 3, 1, 4, 2)).reshape(s * n_rb, nb, layout.rows, layout.cols)
    idx = gen.integers(0, c.size, (s * n_rb, layout.n_data))
    grid = build_frame(c.points[idx], layout)
    r = h * grid[:, None] + _noise(gen, nv, h.shape)
    data = ~layout.pilot_mask
    out = {}
    for det in cfg.detectors:
        if det == "d3-rb":
            est = detect_resource_block(r, layout, c, branches=True, order=cfg.layout.order).indices
        elif det == "coherent":
            est = coherent_mld(r[..., data], h[..., data], c, branches=True).indices
        elif det in ("coherent-l", "coherent-s"):
            est = coherent_rb(r, layout, c, "linear" if det == "coherent-l" else "spline",
                              branches=True)
        else:
            raise ConfigError(f"{det!r} is not a resource-block detector")
        cnt = _counts(est, idx, None)
        cnt[0] = est.size * c.bits_per_symbol
        out[det] = cnt
    return out, float(s * layout.cols)


def _coded_trial(cfg: ExperimentConfig, snr_db: float, gen) -> tuple[dict, float]:
    """One interleaver span of coded blocks, sent over independent OFDM symbols."""
    layout = cfg.layout.segment()
    frame = FrameLayout(cfg.ofdm.n, layout)
    c = constellation(cfg.constellation)
    code = ConvCode()
    il = BlockInterleaver()
    nv = _noise_var(snr_db)
    coded_len = 2 * (cfg.fec.block_bits + code.memory)
    n_blocks = cfg.trial_batch * max(1, il.size // coded_len)
    info = gen.integers(0, 2, (n_blocks, cfg.fec.block_bits), dtype=np.uint8)
    stream = conv_encode(info, code).ravel()
    if cfg.fec.interleaver:
        stream = il.interleave(stream)
    n_sym = -(-stream.size // frame.n_data)
    payload = gen.integers(0, 2, n_sym * frame.n_data, dtype=np.uint8)
    payload[: stream.size] = stream
    idx = payload.reshape(n_sym, frame.n_data).astype(np.int64)
    grid = build_frame(c.points[idx], frame)
    r, h = _ofdm_channel(cfg, grid, gen, nv)
    out = {}
    for det in cfg.detectors:
        est = _frame_front_end(det, r, h, frame, c)
        hard = indices_to_bits(est, c).reshape(-1)[: stream.size]
        if cfg.fec.interleaver:
            hard = il.deinterleave(hard, n_blocks * coded_len)
        decoded = viterbi_decode_hard(hard.reshape(n_blocks, coded_len), code)
        wrong = decoded != info
        out[det] = np.array([info.size, wrong.sum(), wrong.any(axis=1).sum(), n_blocks])
    return out, float(n_sym)


_ENGINES: dict[str, Callable] = {
    "segment": _segment_trial,
    "frame": _frame_trial,
    "rb": _rb_trial,
    "coded": _coded_trial,
}


def run_trial(cfg: ExperimentConfig, snr_index: int, trial_index: int) -> tuple[dict, float]:
    """Evaluate one trial; its random stream depends only on the three keys."""
    gen = RngStream(cfg.seed, (snr_index, trial_index)).generator()
    return _ENGINES[cfg.engine](cfg, cfg.snr_db[snr_index], gen)


# ---------------------------------------------------------------------------
# Experiment loop
# ---------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, workers: int = 1,
                   progress: Callable[[str], None] | None = None) -> list[BerRecord]:
    """Run every (detector, SNR) point; see the module docstring for the stop rule.

    A point stops after the first round in which every detector has at least
    ``min_bits`` bits and ``min_errors`` bit errors, or once ``max_symbols``
    OFDM-symbol equivalents have been spent. Points that stop on the budget
    with fewer than ``min_errors`` errors are flagged unsaturated.
    """
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    records: list[BerRecord] = []
    try:
        for si, snr in enumerate(cfg.snr_db):
            totals = {d: np.zeros(4, dtype=np.int64) for d in cfg.detectors}
            symbols = 0.0
            t = 0
            while True:
                keys = range(t, t + cfg.round_trials)
                job = partial(run_trial, cfg, si)
                results = list(pool.map(job, keys)) if pool else [job(k) for k in keys]
                for counts, used in results:
                    symbols += used
                    for d, v in counts.items():
                        totals[d] += v
                t += cfg.round_trials
                done = all(v[0] >= cfg.min_bits and v[1] >= cfg.min_errors for v in totals.values())
                if done or symbols >= cfg.max_symbols:
                    break
            for d in cfg.detectors:
                rec = _record(d, snr, totals[d], symbols, cfg.min_errors)
                records.append(rec)
                if progress:
                    flag = "" if rec.saturated else " (unsaturated)"
                    progress(f"{cfg.scenario} {d} {snr:g} dB: BER {rec.ber:.3e} "
                             f"[{rec.bit_errors}/{rec.bits}]{flag}")
    finally:
        if pool:
            pool.shutdown()
    return records


# ---------------------------------------------------------------------------
# Theory
# ---------------------------------------------------------------------------

THEORY_HEADER = ("snr_db", "gamma_bar", "method", "p_s", "p_b_mid", "p_b_lower", "p_b_upper",
                 "p_s_closed_form", "p_s_quad_approx", "p_s_quad_exact", "ber_coherent")


def theory_sweep(cfg: ExperimentConfig, rel_tol: float = 1e-8) -> list[dict]:
    """Analytical predictions over the config's SNR grid (flat-fading segments).

    For multipath channels ``p_s`` is the conditional sequence error
    probability averaged over 2000 seeded channel draws.
    """
    if cfg.layout.kind != "segment":
        raise ConfigError("theory is available for segment layouts only")
    lay = cfg.layout.segment()
    if constellation(cfg.constellation).name != "BPSK":
        raise ConfigError("the analytical model covers BPSK")
    rows = []
    key = (lay.mode, lay.k, cfg.branches)
    for snr in cfg.snr_db:
        if math.isinf(snr):
            continue
        g = 10.0 ** (snr / 10.0)
        row: dict[str, Any] = {"snr_db": snr, "gamma_bar": g}
        if len(cfg.channel.delays) == 1:
            pred = analysis.predict(lay.k, lay.mode, cfg.branches, g)
            cf = analysis.CLOSED_FORMS.get(key)
            if cf:
                row["p_s_closed_form"] = cf(g)
            else:
                row["p_s_closed_form"] = pred.p_s if pred.method == "closed-form" else ""
            row["p_s_quad_approx"] = analysis.sep_flat_quadrature(lay.k, g, lay.mode, cfg.branches,
                                                                  "approx", rel_tol)
            row["p_s_quad_exact"] = analysis.sep_flat_quadrature(lay.k, g, lay.mode, cfg.branches,
                                                                 "exact", rel_tol)
        else:
            if cfg.branches != 1:
                raise ConfigError("multipath theory covers one branch")
            p_s = _conditional_average(cfg, lay, g)
            pred = analysis.ber_from_sep(p_s, lay.k_d, "conditional-average")
            row.update(p_s_closed_form="", p_s_quad_approx="", p_s_quad_exact="")
        row.update(method=pred.method, p_s=pred.p_s, p_b_mid=pred.p_b_mid,
                   p_b_lower=pred.p_b_lower, p_b_upper=pred.p_b_upper,
                   ber_coherent=analysis.ber_coherent_bpsk(g, cfg.branches))
        rows.append(row)
    return rows


def _conditional_average(cfg: ExperimentConfig, lay: SegmentLayout, g: float,
                         draws: int = 2000) -> float:
    profile = get_profile(cfg.channel)
    gen = RngStream(cfg.seed, (10 ** 6,)).generator()
    taps = sample_taps(profile, gen, draws)
    h = cfr_from_taps(taps, profile.delays, cfg.ofdm.n, np.arange(lay.k))
    nv = 0.5 / g
    return float(np.mean([analysis.sep_conditional(hh, nv, lay) for hh in h]))


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _check_target(path: Path, overwrite: bool) -> None:
    if path.exists() and not overwrite:
        raise FileExistsError(f"{path} exists; pass overwrite to replace it")


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "nan")
    return str(v)


def write_ber_csv(records: Sequence[BerRecord], path: Path, overwrite: bool = False) -> None:
    _check_target(path, overwrite)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow([_fmt(getattr(r, k)) for k in CSV_HEADER])


def dat_label(det: str) -> str:
    return "d3" if det in ("d3-va", "d3-simo", "d3-rb") else det


def write_dat(columns: dict[str, dict[float, float]], path: Path, overwrite: bool = False) -> None:
    """Whitespace-separated plot data: SNR in the first column, one BER column per curve."""
    _check_target(path, overwrite)
    snrs = sorted({s for col in columns.values() for s in col})
    names = list(columns)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# snr_db " + " ".join(names) + "\n")
        for s in snrs:
            vals = [_fmt(columns[n][s]) if s in columns[n] else "nan" for n in names]
            fh.write(_fmt(float(s)) + " " + " ".join(vals) + "\n")


def emit_outputs(records: Sequence[BerRecord], cfg: ExperimentConfig,
                 out_dir: str | os.PathLike | None = None, overwrite: bool | None = None) -> list[Path]:
    """Write the BER CSV, a .dat plot file and a JSON summary with saturation flags."""
    if not records:
        raise ValueError("no records to write")
    base = Path(out_dir if out_dir is not None else cfg.output.dir)
    over = cfg.output.overwrite if overwrite is None else overwrite
    try:
        base.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {base}: {exc}") from exc
    if not os.access(base, os.W_OK):
        raise PermissionError(f"output directory {base} is not writable")
    name = cfg.output.name or cfg.scenario
    written = []
    csv_path = base / f"{name}.csv"
    write_ber_csv(records, csv_path, over)
    written.append(csv_path)
    if cfg.output.dat:
        cols: dict[str, dict[float, float]] = {}
        for r in records:
            cols.setdefault(dat_label(r.detector), {})[r.snr_db] = r.ber
        p = base / f"{name}.dat"
        write_dat(cols, p, over)
        written.append(p)
    summary = base / f"{name}.json"
    _check_target(summary, over)
    with open(summary, "w", encoding="utf-8") as fh:
        json.dump({"config": _config_json(cfg), "records": [asdict(r) for r in records]},
                  fh, indent=1, sort_keys=True, default=_fmt)
        fh.write("\n")
    written.append(summary)
    return written


def write_theory_csv(rows: Sequence[dict], path: Path, overwrite: bool = False) -> None:
    _check_target(path, overwrite)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(THEORY_HEADER)
        for row in rows:
            w.writerow([_fmt(row.get(k, "")) for k in THEORY_HEADER])


def _config_json(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["snr_db"] = [_fmt(s) if math.isinf(s) else s for s in cfg.snr_db]
    return d
