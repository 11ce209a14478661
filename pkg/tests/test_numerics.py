import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from d3ofdm import numerics as nm


def test_fft_impulse_is_flat():
    assert np.allclose(nm.fft([1, 0, 0, 0]), [0.5] * 4, atol=1e-15)


@pytest.mark.parametrize("n", [2, 8, 64, 512])
def test_fft_matches_numpy_orthonormal(n, gen):
    x = gen.normal(size=(3, n)) + 1j * gen.normal(size=(3, n))
    assert np.allclose(nm.fft(x), np.fft.fft(x, norm="ortho"), atol=1e-12)
    assert np.allclose(nm.ifft(x), np.fft.ifft(x, norm="ortho"), atol=1e-12)


@given(st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_fft_round_trip_and_parseval(log_n, seed):
    g = np.random.default_rng(seed)
    x = g.normal(size=2**log_n) + 1j * g.normal(size=2**log_n)
    y = nm.fft(x)
    assert np.max(np.abs(nm.fft(y, inverse=True) - x)) < 1e-12
    assert np.isclose(np.vdot(y, y).real, np.vdot(x, x).real, rtol=1e-12)


def test_fft_kernels_agree(gen):
    x = np.ascontiguousarray(gen.normal(size=(4, 256)) + 1j * gen.normal(size=(4, 256)))
    loops = getattr(nm._fft_loops, "py_func", nm._fft_loops)
    for sign in (-1.0, 1.0):
        a = nm._fft_loops(x, sign)
        assert np.allclose(a, nm._fft_vectorised(x, sign), atol=1e-12)
        assert np.allclose(a, loops(x, sign), atol=1e-12)


@pytest.mark.parametrize("n", [0, 1, 3, 12, 513])
def test_fft_rejects_non_power_of_two(n):
    with pytest.raises(ValueError):
        nm.fft(np.ones(n))


def test_q_exact_values():
    assert nm.q_exact(0.0) == 0.5
    assert abs(nm.q_exact(-10.0) - 1.0) < 1e-15
    tail, _ = integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), 1.0, np.inf,
                             epsabs=1e-14)
    assert nm.q_exact(1.0) == pytest.approx(tail, rel=1e-10)
    assert nm.q_exact(1.0) == pytest.approx(0.158655, abs=1e-6)


def test_q_approx_values():
    assert nm.q_approx(0.0) == pytest.approx(1 / math.sqrt(2 * math.pi))
    assert 0.9 <= nm.q_approx(3.0) / nm.q_exact(3.0) <= 1.1
    assert nm.q_approx(10.0) == pytest.approx(math.exp(-50) / math.sqrt(2 * math.pi * 101), rel=1e-12)
    with pytest.raises(ValueError):
        nm.q_approx(-1.0)


@given(st.floats(0.5, 30.0))
def test_q_approx_ratio_tightens(x):
    # the approximation is within a few percent of the exact tail for moderate arguments
    ratio = float(nm.q_approx(x) / nm.q_exact(x))
    assert 0.85 < ratio < 1.15


def test_e1_values():
    oracle, _ = integrate.quad(lambda t: math.exp(-t) / t, 1.0, np.inf, epsabs=1e-14)
    assert nm.exp_integral_e1(1.0) == pytest.approx(oracle, rel=1e-10)
    assert nm.exp_integral_e1(1.0) == pytest.approx(0.2193839, abs=1e-7)
    x = 50.0
    assert abs(x * math.exp(x) * nm.exp_integral_e1(x) - 1.0) < 0.02


def test_e1_against_scipy_and_monotone():
    x = np.concatenate([np.geomspace(1e-6, 1, 40), np.linspace(1, 200, 80)[1:]])
    got = np.asarray(nm.exp_integral_e1(x))
    assert np.allclose(got, special.exp1(x), rtol=1e-10, atol=0)
    assert np.all(np.diff(got) < 0)
    with pytest.raises(ValueError):
        nm.exp_integral_e1(0.0)


def test_j0_values():
    assert nm.bessel_j0(0.0) == 1.0
    assert abs(nm.bessel_j0(2.404825557)) < 1e-6
    x = np.linspace(0, 60, 301)
    assert np.allclose(nm.bessel_j0(x), special.j0(x), atol=1e-12)


@given(st.floats(-50, 50))
def test_j0_even(x):
    assert nm.bessel_j0(-x) == pytest.approx(nm.bessel_j0(x), abs=1e-15)


def test_complex_gaussian_variance():
    w = nm.sample_complex_gaussian(nm.RngStream(7, 1), 2.0, size=10**6)
    assert 1.98 <= np.mean(np.abs(w) ** 2) <= 2.02
    assert abs(np.var(w.real) - 1.0) < 0.01
    with pytest.raises(ValueError):
        nm.sample_complex_gaussian(nm.RngStream(7), 0.0, size=4)


def test_streams_deterministic_and_distinct():
    a = nm.sample_complex_gaussian(nm.RngStream(3, (1, 2)), 1.0, size=16)
    b = nm.sample_complex_gaussian(nm.RngStream(3, (1, 2)), 1.0, size=16)
    c = nm.sample_complex_gaussian(nm.RngStream(3, (2, 1)), 1.0, size=16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_adaptive_simpson():
    assert nm.adaptive_simpson(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1, rel=1e-10)
    f = lambda t: 1.0 / (1.0 + t * t)
    assert nm.integrate_pieces(f, [0, 1, 10, 1e4]) == pytest.approx(math.atan(1e4), rel=1e-9)
