import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from d3ofdm import harness as hx
from d3ofdm import scenarios

SMALL = {"snr_db": [5, 15], "min_bits": 20_000, "min_errors": 50, "max_symbols": 2_000}


def small(name, **kw):
    return hx.config_from_dict({"scenario": name, **SMALL, **kw})


@pytest.mark.parametrize("raw", [
    {"scenario": "flat-ss-k2-bpsk", "colour": "red"},
    {"scenario": "flat-ss-k2-bpsk", "layout": {"kind": "segment", "spacing": 3}},
    {"scenario": "coded-interleaved", "fec": {"enabled": True, "rate": 0.5}},
    {"scenario": "flat-ss-k2-bpsk", "output": {"format": "xml"}},
    {"scenario": "rb-mobility-50", "mobility": {"speed_kmh": 50, "heading": 3}},
    {"scenario": "flat-ss-k2-bpsk", "channel": {"delays": [0], "powers": [1], "doppler": 1}},
])
def test_unknown_keys_rejected(raw):
    with pytest.raises(hx.ConfigError, match="unknown key"):
        hx.config_from_dict(raw)


@pytest.mark.parametrize("raw", [
    {"scenario": "flat-ss-k2-bpsk", "detectors": ["d3-rb"]},
    {"scenario": "rb-mobility-50", "detectors": ["glrt"]},
    {"scenario": "sel-ss-k2-bpsk", "engine": "segment"},
    {"scenario": "flat-ss-k2-bpsk", "detectors": ["nonsense"]},
    {"scenario": "flat-ss-k2-bpsk", "min_bits": 5_000},
    {"scenario": "flat-ss-k2-bpsk", "snr_db": []},
    {"scenario": "coded-interleaved", "constellation": "QPSK"},
    {"scenario": "flat-ss-k2-bpsk", "channel": {"delays": [0, 80], "powers": [1, 1]}},
    {"scenario": "flat-ds-k3-bpsk", "detectors": ["d3-coded"]},
])
def test_invalid_combinations_rejected(raw):
    with pytest.raises(hx.ConfigError):
        hx.config_from_dict(raw)


def test_every_builtin_scenario_parses():
    engines = {hx.config_from_dict({"scenario": s}).engine for s in scenarios.SCENARIOS}
    assert engines == {"segment", "frame", "rb", "coded"}
    for fig in scenarios.FIGURES.values():
        assert all(name in scenarios.SCENARIOS for name, _ in fig)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"scenario": "flat-ds-k3-bpsk", "seed": 5}))
    assert hx.load_config(p).seed == 5
    p.write_text("{not json")
    with pytest.raises(hx.ConfigError):
        hx.load_config(p)


def test_flat_ss_k2_at_10db_contains_prediction():
    cfg = hx.config_from_dict({"scenario": "flat-ss-k2-bpsk", "snr_db": [10],
                               "detectors": ["d3-bf"], "min_bits": 200_000})
    (rec,) = hx.run_experiment(cfg)
    assert rec.ci_low <= 1 / 22 <= rec.ci_high
    assert rec.ber == rec.bit_errors / rec.bits and rec.ser == rec.ber


@pytest.mark.parametrize("raw", [
    {"scenario": "flat-ds-k3-bpsk",
     "detectors": ["coherent", "coherent-l", "coherent-s", "glrt", "d3-bf", "d3-va"]},
    {"scenario": "simo-flat-ss-k2"},
    {"scenario": "flat-ds-k3-bpsk", "engine": "frame", "detectors": ["coherent", "glrt", "d3-va"]},
    {"scenario": "flat-ds-k3-bpsk", "engine": "frame", "domain": "time", "detectors": ["d3-va"]},
    {"scenario": "rb-mobility-50", "channel": "flat", "mobility": {"speed_kmh": 0}},
    {"scenario": "coded-interleaved", "channel": "flat", "detectors": ["d3-va", "coherent"]},
    {"scenario": "flat-ds-k3-bpsk", "detectors": ["d3-coded"], "codebook_generator": [[1]]},
])
def test_zero_noise_smoke(raw):
    cfg = hx.config_from_dict({**raw, "snr_db": ["inf"], "min_bits": 10_000, "max_symbols": 64})
    for rec in hx.run_experiment(cfg):
        assert rec.bit_errors == 0, rec
        assert not rec.saturated


def test_worker_count_does_not_change_output(tmp_path):
    cfg = small("qpsk-sel-siso", detectors=["d3-va", "glrt", "coherent-l"])
    a = hx.emit_outputs(hx.run_experiment(cfg, workers=1), cfg, tmp_path / "one")
    b = hx.emit_outputs(hx.run_experiment(cfg, workers=3), cfg, tmp_path / "three")
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_seed_changes_output():
    a = hx.run_experiment(small("flat-ss-k2-bpsk", seed=1))
    b = hx.run_experiment(small("flat-ss-k2-bpsk", seed=2))
    assert [r.bit_errors for r in a] != [r.bit_errors for r in b]


def test_outputs_contract(tmp_path):
    cfg = small("flat-ds-k3-bpsk")
    recs = hx.run_experiment(cfg)
    paths = hx.emit_outputs(recs, cfg, tmp_path)
    assert [p.suffix for p in paths] == [".csv", ".dat", ".json"]
    with open(paths[0]) as fh:
        rows = list(csv.reader(fh))
    assert ",".join(rows[0]) == "detector,snr_db,bits,bit_errors,ber,ci_low,ci_high,seq_errors,seqs,ser"
    assert len(rows) == 1 + len(recs)
    before = paths[0].read_bytes()
    with pytest.raises(FileExistsError):
        hx.emit_outputs(recs, cfg, tmp_path)
    assert paths[0].read_bytes() == before
    hx.emit_outputs(recs, cfg, tmp_path, overwrite=True)
    header = paths[1].read_text().splitlines()[0].split()
    assert header == ["#", "snr_db", "d3", "coherent"]
    summary = json.loads(paths[2].read_text())
    assert {r["detector"] for r in summary["records"]} == {"d3-va", "coherent"}
    assert all("saturated" in r for r in summary["records"])
    with pytest.raises(ValueError):
        hx.emit_outputs([], cfg, tmp_path)


def test_unsaturated_points_flagged():
    cfg = hx.config_from_dict({"scenario": "flat-ds-k3-bpsk", "snr_db": [40], "min_bits": 10_000,
                               "max_symbols": 100, "detectors": ["coherent"]})
    (rec,) = hx.run_experiment(cfg)
    assert rec.bit_errors < 100 and not rec.saturated


def test_records_carry_enough_errors():
    for rec in hx.run_experiment(small("flat-ss-k2-bpsk", max_symbols=100_000)):
        assert rec.bit_errors >= 50 and rec.bits >= 20_000 and rec.saturated


@given(st.integers(0, 400), st.integers(1, 400))
def test_binomial_interval_brackets(k, extra):
    n = k + extra
    lo, hi = hx.binomial_interval(k, n)
    assert 0 <= lo <= k / n <= hi <= 1


def test_theory_sweep_flat():
    rows = hx.theory_sweep(hx.config_from_dict({"scenario": "flat-ss-k2-bpsk"}))
    for row in rows:
        assert row["p_s"] == pytest.approx(1 / (2 * (row["gamma_bar"] + 1)))
    ps = [r["p_s"] for r in rows]
    coh = [r["ber_coherent"] for r in rows]
    assert all(b < a for a, b in zip(ps, ps[1:])) and all(b < a for a, b in zip(coh, coh[1:]))
    ds3 = hx.theory_sweep(hx.config_from_dict({"scenario": "flat-ds-k3-bpsk"}))
    for row in ds3:
        assert row["p_s_closed_form"] != "" and row["p_s_quad_exact"] > 0
        assert row["p_s_quad_approx"] == pytest.approx(row["p_s_quad_exact"], rel=0.5)


def test_theory_sweep_multipath():
    rows = hx.theory_sweep(hx.config_from_dict({"scenario": "sel-ds-k3-bpsk", "snr_db": [10, 30]}))
    assert rows[0]["method"] == "conditional-average" and rows[0]["p_s"] > rows[1]["p_s"] >= 0
    with pytest.raises(hx.ConfigError):
        hx.theory_sweep(hx.config_from_dict({"scenario": "rb-mobility-50"}))


def test_freq_selective_bundle_columns(tmp_path, monkeypatch):
    from d3ofdm import cli
    for name, _ in scenarios.FIGURES["fig-freq-selective"]:
        monkeypatch.setitem(scenarios.SCENARIOS, name,
                            {**scenarios.SCENARIOS[name], "snr_db": [20], "min_bits": 10_000,
                             "max_symbols": 64})
    assert cli.main(["simulate", "--figure", "fig-freq-selective", "--out", str(tmp_path),
                     "--quiet"]) == 0
    header = (tmp_path / "fig-freq-selective.dat").read_text().splitlines()[0].split()[2:]
    assert {"d3", "coherent", "coherent-l", "coherent-s", "glrt"} <= set(header)
    assert "d3.simo" in header
