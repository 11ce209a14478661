import numpy as np
import pytest
from hypothesis import given, strategies as st

from d3ofdm import fec
from d3ofdm.harness import config_from_dict, run_trial


def test_generators_and_impulse_response():
    code = fec.ConvCode()
    assert code.generators == (0o171, 0o131) and code.n_states == 64
    out = fec.conv_encode(np.array([1, 0, 0, 0, 0, 0, 0]))
    g1 = [int(b) for b in format(0o171, "07b")]
    g2 = [int(b) for b in format(0o131, "07b")]
    expected = np.ravel(np.column_stack([g1, g2]))
    assert np.array_equal(out[:14], expected)
    assert not out[14:].any()


def test_zero_input():
    assert not fec.conv_encode(np.zeros(40, np.uint8)).any()


@given(st.integers(0, 2**32 - 1), st.integers(1, 80))
def test_encoder_linear(seed, n):
    g = np.random.default_rng(seed)
    a, b = g.integers(0, 2, (2, n), dtype=np.uint8)
    assert np.array_equal(fec.conv_encode(a ^ b), fec.conv_encode(a) ^ fec.conv_encode(b))


def test_free_distance():
    assert fec.free_distance() == 7
    # the K=3 (7,5) code is a textbook d_free=5 case
    assert fec.free_distance(fec.ConvCode((0o7, 0o5), 3)) == 5


def test_error_free_round_trip():
    bits = np.random.default_rng(1).integers(0, 2, (10_000, 256), dtype=np.uint8)
    assert np.array_equal(fec.viterbi_decode_hard(fec.conv_encode(bits)), bits)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_corrects_up_to_three_flips(seed, flips):
    g = np.random.default_rng(seed)
    bits = g.integers(0, 2, 256, dtype=np.uint8)
    coded = fec.conv_encode(bits)
    pos = g.choice(coded.size, flips, replace=False)
    coded[pos] ^= 1
    assert np.array_equal(fec.viterbi_decode_hard(coded), bits)


def test_every_single_flip_corrected():
    bits = np.random.default_rng(2).integers(0, 2, 64, dtype=np.uint8)
    coded = fec.conv_encode(bits)
    noisy = np.repeat(coded[None], coded.size, axis=0)
    noisy[np.arange(coded.size), np.arange(coded.size)] ^= 1
    assert np.array_equal(fec.viterbi_decode_hard(noisy), np.repeat(bits[None], coded.size, 0))


def test_decoder_kernels_agree():
    from d3ofdm.fec import _viterbi_hard_loops, _viterbi_hard_vectorised
    g = np.random.default_rng(3)
    code = fec.ConvCode()
    coded = fec.conv_encode(g.integers(0, 2, (40, 100), dtype=np.uint8))
    coded ^= (g.random(coded.shape) < 0.08).astype(np.uint8)
    coded = np.ascontiguousarray(coded)
    outs = code.branch_outputs.astype(np.int64)
    loops = getattr(_viterbi_hard_loops, "py_func", _viterbi_hard_loops)
    a = _viterbi_hard_loops(coded, outs, code.memory)
    assert np.array_equal(a, _viterbi_hard_vectorised(coded, outs, code.memory))
    assert np.array_equal(a, loops(coded, outs, code.memory))


def test_decoder_input_checks():
    with pytest.raises(ValueError):
        fec.viterbi_decode_hard(np.zeros(7, np.uint8))
    with pytest.raises(ValueError):
        fec.ConvCode((0o777, 0o5), 3)


def test_interleaver_permutation():
    il = fec.BlockInterleaver()
    assert il.permutation[0] == 0 and il.permutation[1] == 512
    assert np.all(np.abs(np.diff(il.permutation[:4096].astype(np.int64))) >= 512)
    assert np.array_equal(np.sort(il.permutation), np.arange(il.size))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3 * 64))
def test_interleaver_round_trip(seed, n):
    il = fec.BlockInterleaver(8, 8)
    x = np.random.default_rng(seed).integers(0, 2, n, dtype=np.uint8)
    y = fec.interleave(x, il)
    assert y.size % 64 == 0
    assert np.array_equal(fec.deinterleave(y, n, il), x)


def test_coded_beats_uncoded_on_selective_channel():
    for snr in (8, 10):
        coded = config_from_dict({"scenario": "coded-interleaved", "snr_db": [snr],
                                  "detectors": ["d3-va"]})
        cnt, _ = run_trial(coded, 0, 0)
        plain = config_from_dict({"scenario": "cmp-ds-k7-bpsk", "snr_db": [snr],
                                  "detectors": ["d3-va"]})
        unc = sum(run_trial(plain, 0, t)[0]["d3-va"] for t in range(2))
        assert cnt["d3-va"][1] / cnt["d3-va"][0] < unc[1] / unc[0]
