import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import binom

from d3ofdm import channel as ch
from d3ofdm import detectors as det
from d3ofdm import ofdm
from d3ofdm.analysis import sep_simo_flat
from d3ofdm.numerics import RngStream

BPSK = ofdm.constellation("BPSK")
QPSK = ofdm.constellation("QPSK")
QAM16 = ofdm.constellation("16QAM")


def cn(g, shape, var=1.0):
    return np.sqrt(var / 2) * (g.normal(size=shape) + 1j * g.normal(size=shape))


def within_3sigma(errors, n, p):
    lo, hi = binom.ppf([0.00135, 0.99865], n, p)
    return lo <= errors <= hi


def segments(g, layout, c, n, snr_db, taps="flat", branches=0):
    """Random segments through a fading channel; returns (r, data indices, h)."""
    idx = g.integers(0, c.size, (n, layout.k_d))
    d = ofdm.build_frame(c.points[idx], layout)
    shape = (n, branches, 1) if branches else (n, 1)
    if taps == "flat":
        h = cn(g, shape)
    else:
        p = ch.get_profile(taps)
        start = g.integers(0, 512 - layout.k, n)
        t = ch.sample_taps(p, g, size=shape[:-1])
        v = start.reshape((n,) + (1,) * (len(shape) - 1)) + np.arange(layout.k)
        h = np.sum(t[..., None, :] * np.exp(-2j * np.pi * v[..., None] * np.array(p.delays) / 512), -1)
    dd = d[:, None, :] if branches else d
    r = h * dd + cn(g, np.broadcast_shapes(np.shape(h), dd.shape), 2 * ofdm.noise_var_for_snr(snr_db))
    return r, idx, h


# ---------------------------------------------------------------------------
# coherent receivers

def test_coherent_noiseless_exact(gen):
    idx = gen.integers(0, 16, 200)
    h = cn(gen, 200)
    res = det.coherent_mld(h * QAM16.points[idx], h, QAM16)
    assert np.array_equal(res.indices, idx) and res.erasures == 0


def test_coherent_bpsk_flat_rayleigh_ber():
    g = np.random.default_rng(21)
    n, gamma = 400_000, 10.0
    b = g.integers(0, 2, n)
    h = cn(g, n)
    r = h * BPSK.points[b] + cn(g, n, 1 / gamma)
    errors = int((det.coherent_mld(r, h, BPSK).indices != b).sum())
    p = 0.5 * (1 - np.sqrt(gamma / (1 + gamma)))
    assert within_3sigma(errors, n, p)


def test_coherent_zero_channel_flagged():
    res = det.coherent_mld(np.array([0.3, -1.0]), np.array([0.0, 1.0]), QPSK)
    assert res.indices[0] == 0 and res.erasures == 1


def test_ls_interpolation_exact_cases():
    mask = np.zeros(32, bool)
    mask[[3, 20]] = True
    est = det.ls_estimate_interpolate(np.full(32, 0.4 - 0.1j), mask)
    assert np.max(np.abs(est.h_hat - (0.4 - 0.1j))) < 1e-12
    v = np.arange(32)
    h = (1 + 2j) - (0.05 - 0.02j) * v
    mask[[9, 27]] = True
    for kind in ("linear", "spline"):
        est = det.ls_estimate_interpolate(h, mask, 1.0, kind)
        assert np.max(np.abs(est.h_hat - h)) < 1e-10
    with pytest.raises(ValueError):
        det.ls_estimate_interpolate(h, np.zeros(32, bool))


def test_spline_beats_linear_on_tux6():
    g = np.random.default_rng(22)
    p = ch.get_profile("tux6")
    frame = ofdm.FrameLayout(512, ofdm.SegmentLayout(7, "DS"))
    h = ch.cfr_from_taps(ch.sample_taps(p, g, size=10_000), p.delays, 512)
    r = h + cn(g, h.shape, 2 * ofdm.noise_var_for_snr(30.0))
    mse = {k: np.mean(np.abs(det.ls_estimate_interpolate(r, frame.pilot_mask, 1.0, k).h_hat - h) ** 2)
           for k in ("linear", "spline")}
    assert mse["spline"] <= mse["linear"]


def test_zero_forcing():
    d = QPSK.points[[0, 1, 2, 3]]
    h = np.array([1.0, 1j, -0.5, 2.0])
    eq, zero = det.zf_equalize(h * d, h)
    assert np.allclose(eq, d) and not zero.any()
    eq, _ = det.zf_equalize(h * d, 2 * h)
    assert np.allclose(eq, d / 2)
    res = det.zf_detect(h * d, np.array([1.0, 0.0, -0.5, 2.0]), QPSK)
    assert res.erasures == 1


# ---------------------------------------------------------------------------
# exhaustive searches

@pytest.mark.parametrize("c", [BPSK, QPSK, QAM16], ids=lambda c: c.name)
@pytest.mark.parametrize("layout", [ofdm.SegmentLayout(3, "SS"), ofdm.SegmentLayout(4, "DS")],
                         ids=lambda l: f"{l.mode}{l.k}")
def test_noiseless_flat_recovery(c, layout, gen):
    idx = gen.integers(0, c.size, (50, layout.k_d))
    r = cn(gen, (50, 1)) * ofdm.build_frame(c.points[idx], layout)
    for fn in (det.d3_bruteforce, det.glrt_mlsd, det.d3_viterbi):
        assert np.array_equal(fn(r, layout, c).indices, idx)


def test_bpsk_ss2_sequence_error_rate():
    g = np.random.default_rng(23)
    lay = ofdm.SegmentLayout(2, "SS")
    n = 200_000
    r, idx, _ = segments(g, lay, BPSK, n, 10.0)
    errors = int(np.any(det.d3_bruteforce(r, lay, BPSK).indices != idx, axis=-1).sum())
    assert within_3sigma(errors, n, 1 / 22)


def test_phase_ambiguity_without_pilot(gen):
    d = BPSK.points[gen.integers(0, 2, 6)]
    r = cn(gen, 6)
    assert det.d3_objective(d, r) == pytest.approx(det.d3_objective(-d, r))


def test_quotient_and_correlation_forms_agree(gen):
    lay = ofdm.SegmentLayout(6, "SS")
    r = cn(gen, (300, 6))
    a = det.d3_bruteforce(r, lay, BPSK, form="quotient").indices
    b = det.d3_bruteforce(r, lay, BPSK, form="bpsk").indices
    assert np.array_equal(a, b)


def test_budget_guard():
    with pytest.raises(ValueError):
        det.d3_bruteforce(np.ones(8), ofdm.SegmentLayout(8, "SS"), QAM16, budget=1000)


@given(st.sampled_from([BPSK, QPSK]), st.integers(2, 8), st.sampled_from(["SS", "DS"]),
       st.integers(0, 2**32 - 1), st.floats(-5, 30))
def test_viterbi_equals_bruteforce(c, k, mode, seed, snr):
    if mode == "DS" and k < 3:
        k = 3
    lay = ofdm.SegmentLayout(k, mode)
    r, _, _ = segments(np.random.default_rng(seed), lay, c, 40, snr)
    assert np.array_equal(det.d3_viterbi(r, lay, c).indices, det.d3_bruteforce(r, lay, c).indices)


def test_viterbi_single_step():
    res = det.d3_viterbi(np.array([1.0, 1.0]), ofdm.SegmentLayout(2, "SS"), BPSK)
    assert BPSK.points[res.indices[0]] == 1


def test_viterbi_16qam_ds7_trellis():
    g = np.random.default_rng(24)
    lay = ofdm.SegmentLayout(7, "DS")
    r, idx, _ = segments(g, lay, QAM16, 20, 40.0)
    trace = det.trellis_trace(r[0], lay, QAM16)
    assert len(trace) == 6
    assert max(len(s.state_values) for s in trace) == 16
    assert det.d3_viterbi(r, lay, QAM16).indices.shape == (20, 5)


def test_viterbi_kernels_agree(gen):
    lay = ofdm.SegmentLayout(6, "DS")
    for c in (BPSK, QAM16):
        r, _, _ = segments(gen, lay, c, 64, 5.0, taps="tux6", branches=2)
        r = np.ascontiguousarray(r)
        av = np.where(lay.pilot_mask, 1.0, 0).astype(complex)[None].repeat(64, 0)
        pts = c.points.astype(complex)
        cm = c.name == "BPSK"
        loops = getattr(det._viterbi_loops, "py_func", det._viterbi_loops)
        a = det._viterbi_loops(r, lay.pilot_mask, av, pts, cm)
        b = det._viterbi_vectorised(r, lay.pilot_mask, av, pts, cm)
        c_ = loops(r, lay.pilot_mask, av, pts, cm)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[0], c_[0])
        assert np.allclose(a[1], b[1])


def test_search_kernels_agree(gen):
    lay = ofdm.SegmentLayout(4, "DS")
    r = np.ascontiguousarray(cn(gen, (30, 2, 4)))
    pv = np.where(lay.pilot_mask, 1.0, 0).astype(complex)
    loops = getattr(det._search_loops, "py_func", det._search_loops)
    for form in (0, 1, 2):
        a = det._search_loops(r, lay.pilot_mask, pv, QPSK.points, form)
        b = det._search_vectorised(r, lay.pilot_mask, pv, QPSK.points, form)
        c_ = loops(r, lay.pilot_mask, pv, QPSK.points, form)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[0], c_[0])


# ---------------------------------------------------------------------------
# GLRT

def test_glrt_matches_d3_in_flat_fading():
    g = np.random.default_rng(25)
    lay = ofdm.SegmentLayout(3, "DS")
    r, idx, _ = segments(g, lay, BPSK, 300_000, 10.0)
    e_d3 = int((det.d3_viterbi(r, lay, BPSK).indices != idx).sum())
    e_gl = int((det.glrt_mlsd(r, lay, BPSK).indices != idx).sum())
    # two-proportion test at 3 sigma
    n = idx.size
    p = (e_d3 + e_gl) / (2 * n)
    assert abs(e_d3 - e_gl) / n < 3 * np.sqrt(2 * p * (1 - p) / n)


def test_glrt_worse_than_d3_on_tux6():
    g = np.random.default_rng(26)
    lay = ofdm.SegmentLayout(7, "DS")
    r, idx, _ = segments(g, lay, BPSK, 100_000, 20.0, taps="tux6")
    e_d3 = int((det.d3_viterbi(r, lay, BPSK).indices != idx).sum())
    e_gl = int((det.glrt_mlsd(r, lay, BPSK).indices != idx).sum())
    assert e_gl > e_d3 + 3 * np.sqrt(e_gl + e_d3)


# ---------------------------------------------------------------------------
# objectives

def test_objective_zero_at_truth(gen):
    d = QPSK.points[gen.integers(0, 4, (3, 5))]
    assert det.d3_objective(d[0], 0.8j * d[0]) == pytest.approx(0, abs=1e-24)
    assert det.d3_objective_2d(d, 0.8j * d) == pytest.approx(0, abs=1e-24)


def test_objective_2d_reductions(gen):
    d = QPSK.points[gen.integers(0, 4, (1, 6))]
    r = cn(gen, (1, 6))
    assert det.d3_objective_2d(d, r) == pytest.approx(det.d3_objective(d[0], r[0]))
    d = np.ones((2, 2))
    r = cn(gen, (2, 2))
    hand = (abs(r[0, 0] - r[0, 1]) ** 2 + abs(r[1, 0] - r[1, 1]) ** 2
            + abs(r[0, 0] - r[1, 0]) ** 2 + abs(r[0, 1] - r[1, 1]) ** 2)
    assert det.d3_objective_2d(d, r) == pytest.approx(hand)


# ---------------------------------------------------------------------------
# multiple branches

def test_simo_single_branch_reduces(gen):
    lay = ofdm.SegmentLayout(4, "SS")
    r = cn(gen, (100, 4))
    a = det.d3_simo([r], lay, QPSK, method="bruteforce")
    b = det.d3_bruteforce(r, lay, QPSK, form="quotient")
    assert np.array_equal(a.indices, b.indices)
    assert np.array_equal(det.d3_simo([r], lay, QPSK).indices, b.indices)


def test_simo_duplicated_branches(gen):
    lay = ofdm.SegmentLayout(4, "DS")
    r = cn(gen, (100, 4))
    one = det.d3_bruteforce(r, lay, QPSK, form="quotient")
    two = det.d3_simo([r, r], lay, QPSK, method="bruteforce")
    assert np.array_equal(one.indices, two.indices)
    assert np.allclose(two.metric, 2 * one.metric)
    with pytest.raises(ValueError):
        det.d3_simo([], lay, QPSK)


def test_simo_sep_matches_prediction():
    g = np.random.default_rng(27)
    lay = ofdm.SegmentLayout(2, "SS")
    n = 300_000
    r, idx, _ = segments(g, lay, BPSK, n, 10.0, branches=2)
    errors = int(np.any(det.d3_simo(r, lay, BPSK).indices != idx, axis=-1).sum())
    assert within_3sigma(errors, n, sep_simo_flat(2, 2, 10.0).p_s)


# ---------------------------------------------------------------------------
# resource blocks

@pytest.mark.parametrize("order", ["rows-first", "cols-first"])
def test_rb_noiseless_static(order, gen):
    rb = ofdm.ResourceBlockLayout()
    for c in (BPSK, QPSK):
        idx = gen.integers(0, c.size, (5, 160))
        h = cn(gen, (5, 1, 1))
        r = h * ofdm.build_frame(c.points[idx], rb)
        assert np.array_equal(det.detect_resource_block(r, rb, c, order=order).indices, idx)


def test_rb_static_tracks_segment_detection():
    g = np.random.default_rng(28)
    p = ch.get_profile("tux6")
    rb = ofdm.ResourceBlockLayout()
    frame = ofdm.FrameLayout(512, ofdm.SegmentLayout(5, "DS"))
    nv = ofdm.noise_var_for_snr(20.0)
    e_rb = n_rb = e_ds = n_ds = 0
    for _ in range(150):
        h = ch.cfr_from_taps(ch.sample_taps(p, g), p.delays, 512)
        data = g.integers(0, 2, (42, 160))
        grid = ofdm.build_frame(BPSK.points[data], rb) * h[:504].reshape(42, 12, 1)
        r = grid + cn(g, grid.shape, 2 * nv)
        e_rb += int((det.detect_resource_block(r, rb, BPSK).indices != data).sum())
        n_rb += data.size
        d = g.integers(0, 2, frame.n_data)
        rr = ofdm.build_frame(BPSK.points[d], frame) * h + cn(g, 512, 2 * nv)
        e_ds += int((det.detect_segments(rr, frame, BPSK, "d3-va") != d).sum())
        n_ds += d.size
    # the pilot-row pass adds some error propagation on top of the column segments
    assert 0.5 < (e_rb / n_rb) / (e_ds / n_ds) < 2.0


def test_rb_coherent_noiseless_static(gen):
    rb = ofdm.ResourceBlockLayout()
    idx = gen.integers(0, 4, 160)
    r = (0.3 + 0.9j) * ofdm.build_frame(QPSK.points[idx], rb)
    for kind in ("linear", "spline"):
        assert np.array_equal(det.coherent_rb(r, rb, QPSK, kind), idx)


# ---------------------------------------------------------------------------
# codebook-restricted search

def test_coded_full_codebook_equals_bruteforce(gen):
    lay = ofdm.SegmentLayout(4, "SS")
    cb = np.array([ofdm.build_frame(QPSK.points[list(t)], lay)
                   for t in itertools.product(range(4), repeat=3)])
    r = cn(gen, (200, 4))
    res = det.d3_coded(r, cb)
    bf = det.d3_bruteforce(r, lay, QPSK)
    assert np.array_equal(np.array(list(itertools.product(range(4), repeat=3)))[res.indices], bf.indices)


def test_coded_repetition_noiseless(gen):
    cb = np.array([[1, 1, 1, 1, 1], [1, -1, -1, 1, 1], [1, 1, 1, -1, -1], [1, -1, -1, -1, -1]], complex)
    pick = gen.integers(0, 4, 30)
    r = cn(gen, (30, 1)) * cb[pick]
    assert np.array_equal(det.d3_coded(r, cb).indices, pick)


def test_coded_beats_uncoded():
    g = np.random.default_rng(29)
    gen_matrix = np.array([[1, 0, 0, 1, 1, 0], [0, 1, 0, 0, 1, 1], [0, 0, 1, 1, 0, 1]])
    msgs = np.array(list(itertools.product([0, 1], repeat=3)))
    words = msgs @ gen_matrix % 2
    lay = ofdm.SegmentLayout(7, "SS")
    cb = ofdm.build_frame(BPSK.points[words], lay)
    n = 100_000
    pick = g.integers(0, 8, n)
    h = cn(g, (n, 1))
    nv = 2 * ofdm.noise_var_for_snr(10.0)
    r = h * cb[pick] + cn(g, (n, 7), nv)
    coded = int((det.d3_coded(r, cb).indices != pick).sum())
    lay3 = ofdm.SegmentLayout(4, "SS")
    r3 = h * ofdm.build_frame(BPSK.points[msgs[pick]], lay3) + cn(g, (n, 4), nv)
    uncoded = int(np.any(det.d3_bruteforce(r3, lay3, BPSK).indices != msgs[pick], axis=-1).sum())
    assert coded <= uncoded
