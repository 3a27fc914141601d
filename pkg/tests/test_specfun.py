import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ouremote import specfun as sf
from ouremote.errors import DomainError, DomainOverflow

import oracles

# frozen from the exact-rational series oracles in tests/oracles.py
ERF_1 = 0.8427007929497149
ERFI_1 = 1.6504257587975428
ERFI_2 = 18.564802414575553
G_1 = 2.0300784692787044
G_HALF = 1.1845930729386531
K_1 = 0.5380795069127684
M_1 = 5.06015693855741
M_MINUS_1 = -0.07615901382553684


def test_erf_examples():
    assert sf.erf(0.0) == 0.0
    assert sf.erf(1.0) == pytest.approx(ERF_1, rel=1e-14)
    assert sf.erf(-2.0) == -sf.erf(2.0)
    # the literal 60-term Maclaurin sum is fine at x = 1
    assert oracles.erf_series(1, terms=60) == pytest.approx(ERF_1, rel=1e-15)


@pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 2.5, 4.0, 6.0])
def test_erf_against_series(x):
    assert sf.erf(x) == pytest.approx(oracles.erf_series(x), rel=1e-12)


def test_erfi_examples():
    assert sf.erfi(0.0) == 0.0
    assert sf.erfi(1.0) == pytest.approx(ERFI_1, rel=1e-10)
    assert sf.erfi(2.0) == pytest.approx(ERFI_2, rel=1e-10)


@pytest.mark.parametrize("x", [0.3, 1.7, 3.0, 4.5, 6.0])
def test_erfi_against_series(x):
    assert sf.erfi(x) == pytest.approx(oracles.erfi_series(x), rel=1e-10)
    assert sf.erfi(-x) == -sf.erfi(x)


def test_erfi_overflow_guard():
    assert math.isfinite(sf.erfi(26.0))
    with pytest.raises(DomainOverflow):
        sf.erfi(27.0)


def test_g_examples():
    assert sf.g_func(0.0) == 1.0
    assert sf.g_func(1.0) == pytest.approx(G_1, rel=1e-13)
    assert sf.g_func(0.5) == pytest.approx(G_HALF, rel=1e-13)


def test_k_examples():
    assert sf.k_func(0.0) == 1.0
    assert sf.k_func(1.0) == pytest.approx(K_1, rel=1e-13)
    k3 = sf.k_func(3.0)
    assert 0.0 < k3 < 0.1
    direct = math.sqrt(math.pi) / 2 * math.exp(-9.0) * oracles.erfi_series(3) / 3
    assert k3 == pytest.approx(direct, rel=1e-12)
    # asymptotic tail 1/(2x^2)
    assert sf.k_func(200.0) == pytest.approx(1 / (2 * 200.0**2), rel=1e-4)


def test_small_argument_branch_is_continuous():
    for x in (0.5e-4, 0.99999e-4, 1.00001e-4, 2e-4):
        assert sf.g_func(x) == pytest.approx(1 + 2 * x * x / 3, rel=1e-13)
        assert sf.k_func(x) == pytest.approx(1 - 2 * x * x / 3, rel=1e-13)


def test_g_overflow_and_domain():
    with pytest.raises(DomainOverflow):
        sf.g_func(27.0)
    with pytest.raises(DomainError):
        sf.g_func(-0.1)


def test_monotone_on_grid():
    x = np.arange(0.0, 5.0 + 1e-12, 1e-3)
    assert np.all(np.diff(sf.g_func(x)) > 0)
    assert np.all(np.diff(sf.k_func(x)) < 0)
    assert np.all(sf.g_func(x) >= 1.0)
    k = sf.k_func(x)
    assert np.all((k > 0) & (k <= 1))


def test_inverse_examples():
    assert sf.g_inv(1.0) == 0.0
    assert sf.k_inv(1.0) == 0.0
    assert sf.g_inv(G_1) == pytest.approx(1.0, abs=1e-8)
    assert sf.k_inv(K_1) == pytest.approx(1.0, abs=1e-8)
    x10 = sf.g_inv(10.0)
    assert abs(sf.g_func(x10) - 10.0) <= 1e-9
    assert x10 == pytest.approx(oracles.bisect(sf.g_func, 10.0, 0.0, 4.0), rel=1e-12)
    x05 = sf.k_inv(0.05)
    assert abs(sf.k_func(x05) - 0.05) <= 1e-10
    assert x05 == pytest.approx(
        oracles.bisect(sf.k_func, 0.05, 0.0, 8.0, increasing=False), rel=1e-12
    )


@pytest.mark.parametrize("bad", [0.999, -1.0, float("nan")])
def test_g_inv_domain(bad):
    with pytest.raises(DomainError):
        sf.g_inv(bad)


@pytest.mark.parametrize("bad", [0.0, -0.5, 1.0001])
def test_k_inv_domain(bad):
    with pytest.raises(DomainError):
        sf.k_inv(bad)


def test_round_trip_grids():
    for y in np.logspace(0, 6, 121):
        assert abs(sf.g_func(sf.g_inv(y)) - y) / y <= 1e-9
    for y in np.logspace(-6, 0, 121):
        assert abs(sf.k_func(sf.k_inv(y)) - y) / y <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1.0, max_value=1e6))
def test_g_inv_round_trip_property(y):
    assert abs(sf.g_func(sf.g_inv(y)) - y) / y <= 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-6, max_value=1.0))
def test_k_inv_round_trip_property(y):
    assert abs(sf.k_func(sf.k_inv(y)) - y) / y <= 1e-9


def test_kummer_examples():
    assert sf.kummer_1f1_1_half(0.0) == 1.0
    assert sf.kummer_1f1_1_half(1.0) == pytest.approx(M_1, rel=1e-13)
    assert sf.kummer_1f1_1_half(-1.0) == pytest.approx(M_MINUS_1, rel=1e-12)
    # the 40-term series is an adequate oracle at |z| = 1
    assert oracles.kummer_series(1, terms=40) == pytest.approx(M_1, rel=1e-14)
    assert oracles.kummer_series(-1, terms=40) == pytest.approx(M_MINUS_1, rel=1e-13)


@pytest.mark.parametrize("z", [-5.0, -2.5, -0.3, 0.3, 2.5, 5.0])
def test_kummer_vs_forty_term_series_where_it_converges(z):
    assert sf.kummer_1f1_1_half(z) == pytest.approx(oracles.kummer_series(z, terms=40), rel=1e-8)


@pytest.mark.parametrize("z", np.linspace(-25, 25, 21))
def test_kummer_vs_converged_series(z):
    assert sf.kummer_1f1_1_half(z) == pytest.approx(oracles.kummer_series(z), rel=1e-8)


def test_kummer_matches_scipy_hyp1f1_for_positive_argument():
    from scipy.special import hyp1f1

    z = np.linspace(0, 40, 81)
    np.testing.assert_allclose(sf.kummer_1f1_1_half(z), hyp1f1(1.0, 0.5, z), rtol=1e-10)


def test_kummer_identity_with_g_and_k():
    # the real form of K(x) = G(jx)
    x = np.linspace(0.0, 5.0, 501)
    m_pos = sf.kummer_1f1_1_half(x * x)
    m_neg = sf.kummer_1f1_1_half(-x * x)
    ref_pos = np.array([oracles.kummer_series(float(v)) for v in x[::25] ** 2])
    ref_neg = np.array([oracles.kummer_series(-float(v)) for v in x[::25] ** 2])
    np.testing.assert_allclose(m_pos[::25], ref_pos, rtol=1e-8)
    np.testing.assert_allclose(m_neg[::25], ref_neg, rtol=1e-8, atol=0)
    np.testing.assert_allclose(1 + 2 * x * x * sf.g_func(x), m_pos, rtol=1e-12)
    np.testing.assert_allclose(1 - 2 * x * x * sf.k_func(x), m_neg, rtol=1e-12)


def test_kummer_guard():
    assert math.isfinite(sf.kummer_1f1_1_half(650.0))
    with pytest.raises(DomainOverflow):
        sf.kummer_1f1_1_half(651.0)
    with pytest.raises(DomainOverflow):
        sf.kummer_1f1_1_half(-651.0)


def test_array_in_array_out():
    out = sf.g_func(np.array([0.0, 1.0]))
    assert isinstance(out, np.ndarray) and out.shape == (2,)
    assert isinstance(sf.g_func(1.0), float)
