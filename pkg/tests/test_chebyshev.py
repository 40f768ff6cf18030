"""Chebyshev propagator: polynomial oracles, coefficient laws, evolution."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from bandlab import (EntryDistribution, alpha_coefficients, bessel_jn,
                     build_profile, cheb_U, propagate, rho_via_expansion,
                     sample_matrix, wigner_profile)
from bandlab.chebyshev import truncation_tail


def _band(N, W, seed=0):
    prof = build_profile(1, N, W, "box")
    return sample_matrix(prof, EntryDistribution(), seed)


# ---------------------------------------------------------------------------
# the polynomials

@settings(deadline=None, max_examples=120)
@given(st.integers(0, 80), st.floats(0.05, math.pi - 0.05))
def test_cheb_matches_trigonometric_form(n, theta):
    # U~_n(2 cos theta) = sin((n+1) theta) / sin theta
    val = float(cheb_U(n, 2.0 * math.cos(theta)))
    ref = math.sin((n + 1) * theta) / math.sin(theta)
    assert val == pytest.approx(ref, rel=1e-9, abs=1e-9)


@settings(deadline=None, max_examples=80)
@given(st.integers(0, 60), st.floats(0.05, 2.0))
def test_cheb_matches_hyperbolic_form(n, zeta):
    val = float(cheb_U(n, 2.0 * math.cosh(zeta)))
    ref = math.sinh((n + 1) * zeta) / math.sinh(zeta)
    assert val == pytest.approx(ref, rel=1e-9)


def test_cheb_at_two_counts_degrees():
    for n in range(21):
        assert float(cheb_U(n, 2.0)) == n + 1
    assert float(cheb_U(2, 2.0)) == 3.0


def test_cheb_edge_orders_and_shapes():
    xs = np.linspace(-2, 2, 7)
    assert np.array_equal(cheb_U(-1, xs), np.zeros(7))
    assert np.array_equal(cheb_U(0, xs), np.ones(7))
    assert np.array_equal(cheb_U(1, xs), xs)


def test_cheb_bounded_on_the_bulk():
    xs = np.linspace(-2.0, 2.0, 101)
    for n in (3, 10, 25, 50):
        assert np.all(np.abs(cheb_U(n, xs)) <= (n + 1) * (1 + 1e-12))


# ---------------------------------------------------------------------------
# Bessel values and expansion coefficients

def test_bessel_against_scipy():
    for t in (0.5, 1.0, 10.0, 50.0, 200.0):
        n_max = int(t) + 30
        mine = bessel_jn(t, n_max)
        ref = special.jn(np.arange(n_max + 1), t)
        assert np.abs(mine - ref).max() < 1e-13


def test_bessel_power_series_spot_value():
    # J_2(1) = sum_k (-1)^k (1/2)^(2k+2) / (k! (k+2)!)
    ref = sum((-1) ** k * 0.25 ** (k + 1) / (math.factorial(k) * math.factorial(k + 2))
              for k in range(20))
    assert bessel_jn(1.0, 2)[2] == pytest.approx(ref, rel=1e-14)


def test_bessel_degenerate_cases():
    assert bessel_jn(0.0, 4).tolist() == [1.0, 0.0, 0.0, 0.0, 0.0]
    with pytest.raises(ValueError):
        bessel_jn(-1.0, 4)


def test_alpha_at_time_zero():
    coeffs = alpha_coefficients(0.0)
    assert coeffs.alphas.tolist() == [1.0 + 0.0j]
    assert coeffs.residual == 0.0


def test_alpha_spot_value():
    # alpha_1(1) = -4i J_2(1)
    coeffs = alpha_coefficients(1.0, residual_target=1e-12)
    ref = -4j * special.jn(2, 1.0)
    assert coeffs.alphas[1] == pytest.approx(ref, rel=1e-12)


def test_alpha_magnitudes_obey_the_factorial_bound():
    for t in (0.5, 2.0, 20.0, 75.0):
        coeffs = alpha_coefficients(t, residual_target=1e-13)
        assert coeffs.n_max >= math.ceil(t)
        for n, a in enumerate(coeffs.alphas):
            log_bound = min(0.0, n * math.log(t) - math.lgamma(n + 1))
            assert abs(a) <= math.exp(log_bound) * (1 + 1e-10) + 1e-300


def test_alpha_mass_reaches_the_target():
    for t in (1.0, 10.0, 50.0, 200.0):
        coeffs = alpha_coefficients(t, residual_target=1e-12)
        mass = float(np.sum(np.abs(coeffs.alphas) ** 2))
        assert 1.0 - 1e-12 <= mass <= 1.0 + 1e-15
        assert coeffs.residual <= 1e-12


def test_truncation_tail_dominates_the_coefficient_tail():
    coeffs = alpha_coefficients(10.0, residual_target=1e-15)
    mags = np.abs(coeffs.alphas)
    partial = float(mags[21:].sum())
    assert partial <= truncation_tail(10.0, 20)
    # a norm margin only enlarges the bound, and deeper cuts shrink it
    assert truncation_tail(10.0, 20, zeta=0.3) >= truncation_tail(10.0, 20)
    assert truncation_tail(10.0, 30) < truncation_tail(10.0, 20)
    assert truncation_tail(0.0, 5) == 0.0


# ---------------------------------------------------------------------------
# propagation

def test_two_level_rotation():
    H = np.array([[0.0, 1.0], [1.0, 0.0]])
    res = propagate(H, math.pi)
    assert np.allclose(res.psi, [0.0, -1.0j], atol=1e-10)
    t = math.pi / 3
    res = propagate(H, t)
    assert np.allclose(res.psi, [math.cos(t / 2), -1j * math.sin(t / 2)], atol=1e-12)


def test_two_level_rotation_with_phase():
    sig, t = 0.6, 2.3
    a = np.exp(0.4j)
    H = np.array([[0.0, sig * a], [sig * np.conj(a), 0.0]])
    res = propagate(H, t)
    assert res.rho[0] == pytest.approx(math.cos(sig * t / 2) ** 2, abs=1e-12)
    assert res.rho[1] == pytest.approx(math.sin(sig * t / 2) ** 2, abs=1e-12)


def test_time_zero_is_the_identity():
    smp = _band(32, 4)
    psi0 = np.zeros(32, dtype=np.complex128)
    psi0[0] = 1.0
    res = propagate(smp, 0.0, warn_norm=False)
    assert np.array_equal(res.psi, psi0)
    assert res.eps_bound == 0.0


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        propagate(np.eye(2), -1.0)


def test_propagator_matches_dense_eigendecomposition():
    smp = _band(64, 8, seed=1)
    w, v = np.linalg.eigh(smp.to_dense())
    e0 = np.zeros(64, dtype=np.complex128)
    e0[0] = 1.0
    for t in (1.0, 5.0, 20.0):
        ref = v @ (np.exp(-0.5j * t * w) * (v.conj().T @ e0))
        res = propagate(smp, t, warn_norm=False)
        assert float(np.linalg.norm(res.psi - ref)) <= 1e-8
        assert abs(res.norm - 1.0) <= 1e-6
        assert res.n_max >= math.ceil(t)


def test_propagation_is_linear_in_the_state():
    smp = _band(24, 4, seed=3)
    rng = np.random.default_rng(0)
    u = rng.standard_normal(24) + 1j * rng.standard_normal(24)
    v = rng.standard_normal(24) + 1j * rng.standard_normal(24)
    a, b = 0.3 - 0.2j, 1.1 + 0.7j
    pu = propagate(smp, 4.0, psi0=u, warn_norm=False).psi
    pv = propagate(smp, 4.0, psi0=v, warn_norm=False).psi
    pw = propagate(smp, 4.0, psi0=a * u + b * v, warn_norm=False).psi
    assert np.allclose(pw, a * pu + b * pv, atol=1e-10)


def test_norm_bound_warning_toggle():
    smp = sample_matrix(wigner_profile(16), EntryDistribution(), 0)
    assert smp.row_abs_sum_max() > 2.5  # mean-field rows are heavy
    with pytest.warns(UserWarning, match="row-sum norm bound"):
        propagate(smp, 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        propagate(smp, 1.0, warn_norm=False)


# ---------------------------------------------------------------------------
# the order-limited double expansion

def test_expansion_resums_to_the_evolved_weight():
    smp = _band(12, 3, seed=5)
    t = 2.0
    rho = rho_via_expansion(smp, t, n_cut=40)
    ref = propagate(smp, t, residual_target=1e-14, warn_norm=False).rho
    assert np.abs(rho - ref).max() <= 1e-10


def test_expansion_at_time_zero_is_a_point_mass():
    smp = _band(12, 3, seed=5)
    rho = rho_via_expansion(smp, 0.0, n_cut=6)
    expected = np.zeros(12)
    expected[0] = 1.0
    assert np.allclose(rho, expected, atol=1e-15)


def test_odd_order_contributions_average_to_zero():
    # H -> -H flips the sign of exactly the odd n + n' part of the weight,
    # so (rho(H) - rho(-H)) / 2 isolates it; symmetric laws average it away
    prof = build_profile(1, 16, 4, "box")
    dist = EntryDistribution()
    t = 1.5
    origin = 8  # flat index of coordinate 0
    vals = np.empty(400)
    for r in range(400):
        H = sample_matrix(prof, dist, 17, index=r).to_dense()
        rho_plus = propagate(H, t, warn_norm=False).rho
        rho_minus = propagate(-H, t, warn_norm=False).rho
        vals[r] = 0.5 * (rho_plus[origin] - rho_minus[origin])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean()) <= 3.0 * se
    assert se > 0.0


def test_expansion_rejects_oversized_tables():
    smp = _band(64, 8)
    with pytest.raises(ValueError, match="too large"):
        rho_via_expansion(smp, 1.0, n_cut=80_000_000)
