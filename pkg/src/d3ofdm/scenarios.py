"""Built-in experiment definitions.

Each scenario is a plain JSON-style dictionary accepted by
:func:`d3ofdm.harness.config_from_dict`; a user config naming a scenario is
merged on top of it. Figure bundles group scenarios whose curves are plotted
together.
"""

from __future__ import annotations

import copy

_FLAT_GRID = [0, 5, 10, 15, 20, 25, 30]
_SEL_GRID = [0, 5, 10, 15, 20, 25, 30, 35, 40]


def _base(**kw) -> dict:
    cfg = {
        "n": 512,
        "n_cp": 64,
        "channel": "flat",
        "constellation": "BPSK",
        "branches": 1,
        "min_bits": 100_000,
        "min_errors": 100,
        "max_symbols": 100_000,
        "seed": 2024,
    }
    cfg.update(kw)
    return cfg


def _seg(mode: str, k: int) -> dict:
    return {"kind": "segment", "mode": mode, "k": k}


_RB = {"kind": "rb", "order": "rows-first"}

SCENARIOS: dict[str, dict] = {
    # flat fading, single- and double-sided segments
    "flat-ss-k2-bpsk": _base(layout=_seg("SS", 2), detectors=["d3-bf", "d3-va", "coherent"],
                             snr_db=_FLAT_GRID),
    "flat-ss-k6-bpsk": _base(layout=_seg("SS", 6), detectors=["d3-va", "coherent"], snr_db=_FLAT_GRID),
    "flat-ds-k3-bpsk": _base(layout=_seg("DS", 3), detectors=["d3-va", "coherent"], snr_db=_FLAT_GRID),
    "flat-ds-k7-bpsk": _base(layout=_seg("DS", 7), detectors=["d3-va", "coherent"], snr_db=_FLAT_GRID),
    # frequency-selective, one data cell per segment
    "sel-ss-k2-bpsk": _base(channel="tux6", layout=_seg("SS", 2), detectors=["d3-va", "coherent"],
                            snr_db=_SEL_GRID),
    "sel-ds-k3-bpsk": _base(channel="tux6", layout=_seg("DS", 3), detectors=["d3-va", "coherent"],
                            snr_db=_SEL_GRID),
    "sel9-ss-k2-bpsk": _base(channel="tux9", layout=_seg("SS", 2), detectors=["d3-va", "coherent"],
                             snr_db=_SEL_GRID),
    "sel9-ds-k3-bpsk": _base(channel="tux9", layout=_seg("DS", 3), detectors=["d3-va", "coherent"],
                             snr_db=_SEL_GRID),
    # two receive branches, flat fading
    "simo-flat-ss-k2": _base(layout=_seg("SS", 2), branches=2,
                             detectors=["d3-simo", "glrt", "coherent"], snr_db=[0, 5, 10, 15, 20, 25]),
    "simo-flat-ds-k3": _base(layout=_seg("DS", 3), branches=2,
                             detectors=["d3-simo", "glrt", "coherent"], snr_db=[0, 5, 10, 15, 20, 25]),
    "siso-flat-ss-k2-glrt": _base(layout=_seg("SS", 2), detectors=["d3-va", "glrt", "coherent"],
                                  snr_db=[0, 5, 10, 15, 20, 25]),
    # QPSK over the 6-tap channel, one and two branches
    "qpsk-sel-siso": _base(channel="tux6", constellation="QPSK", layout=_seg("DS", 3),
                           detectors=["d3-va", "glrt", "coherent", "coherent-l", "coherent-s"],
                           snr_db=[0, 5, 10, 15, 20, 25, 30]),
    "qpsk-sel-simo": _base(channel="tux6", constellation="QPSK", layout=_seg("DS", 3), branches=2,
                           detectors=["d3-simo", "glrt", "coherent", "coherent-l", "coherent-s"],
                           snr_db=[0, 5, 10, 15, 20, 25, 30]),
    # detector comparison, seven-cell double-sided segments
    "cmp-ds-k7-bpsk": _base(channel="tux6", layout=_seg("DS", 7),
                            detectors=["d3-va", "d3-bf", "glrt", "coherent", "coherent-l", "coherent-s"],
                            snr_db=[0, 5, 10, 15, 20, 25, 30, 35]),
    "qam16-ds-k7": _base(channel="tux6", constellation="16QAM", layout=_seg("DS", 7),
                         detectors=["d3-va", "glrt", "coherent", "coherent-l", "coherent-s"],
                         snr_db=[10, 15, 20, 25, 30, 35, 40], max_symbols=2_000),
    # resource blocks under mobility
    "rb-mobility-50": _base(channel="tux6", layout=dict(_RB), mobility={"speed_kmh": 50.0},
                            detectors=["d3-rb", "coherent", "coherent-l", "coherent-s"],
                            snr_db=[0, 5, 10, 15, 20, 25, 30, 35, 40]),
    "rb-mobility-300": _base(channel="tux6", layout=dict(_RB), mobility={"speed_kmh": 300.0},
                             detectors=["d3-rb", "coherent", "coherent-l", "coherent-s"],
                             snr_db=[0, 5, 10, 15, 20, 25, 30, 35, 40]),
    # convolutionally coded chain
    "coded-interleaved": _base(channel="tux6", layout=_seg("DS", 7),
                               detectors=["d3-va", "coherent-l", "coherent"],
                               fec={"enabled": True, "interleaver": "on", "block_bits": 256},
                               snr_db=[0, 2, 4, 6, 8, 10, 12, 14], min_bits=200_000, max_symbols=100_000),
    "coded-no-interleaver": _base(channel="tux6", layout=_seg("DS", 7),
                                  detectors=["d3-va", "coherent-l", "coherent"],
                                  fec={"enabled": True, "interleaver": "off", "block_bits": 256},
                                  snr_db=[0, 4, 8, 12, 16, 18, 20, 22, 24], min_bits=200_000,
                                  max_symbols=100_000),
}

# bundle -> (scenario, tag) pairs; the first scenario's columns are unprefixed
FIGURES: dict[str, list[tuple[str, str]]] = {
    "fig-flat": [("flat-ss-k2-bpsk", "ss2"), ("flat-ss-k6-bpsk", "ss6"),
                 ("flat-ds-k3-bpsk", "ds3"), ("flat-ds-k7-bpsk", "ds7")],
    "fig-selective": [("sel-ss-k2-bpsk", "ss2"), ("sel-ds-k3-bpsk", "ds3"),
                      ("sel9-ss-k2-bpsk", "tux9-ss2"), ("sel9-ds-k3-bpsk", "tux9-ds3")],
    "fig-simo": [("simo-flat-ss-k2", "simo-ss2"), ("simo-flat-ds-k3", "simo-ds3"),
                 ("siso-flat-ss-k2-glrt", "siso-ss2")],
    "fig-freq-selective": [("qpsk-sel-siso", "siso"), ("qpsk-sel-simo", "simo")],
    "fig-compare": [("cmp-ds-k7-bpsk", "ds7")],
    "fig-16qam": [("qam16-ds-k7", "ds7")],
    "fig-rb": [("rb-mobility-50", "v50"), ("rb-mobility-300", "v300")],
    "fig-coded": [("coded-interleaved", "il"), ("coded-no-interleaver", "noil")],
}


def scenario(name: str) -> dict:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; see `scenarios --list`")
    return copy.deepcopy(SCENARIOS[name]) | {"scenario": name}


def describe(name: str) -> str:
    s = SCENARIOS[name]
    lay = s["layout"]
    shape = "RB" if lay["kind"] == "rb" else f"{lay['mode']} K={lay['k']}"
    extra = ""
    if "mobility" in s:
        extra += f", {s['mobility']['speed_kmh']:g} km/h"
    if s.get("fec", {}).get("enabled"):
        extra += f", coded (interleaver {s['fec']['interleaver']})"
    return (f"{s['channel']}, {s['constellation']}, {shape}, {s['branches']} branch(es){extra}: "
            f"{', '.join(s['detectors'])}")
