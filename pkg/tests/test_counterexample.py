import math

import numpy as np
import pytest
from scipy.integrate import quad

from dirac_spectra.asymptotics import to_marchenko
from dirac_spectra.core import periodic_type_matrix, tau0
from dirac_spectra.counterexample import (ConstructionError, PlanOverflowError, asymptotic_pair,
                                          build_p_tilde, fourier_truncate, full_gap_ratio,
                                          integral_estimates, l1_distance, lacunary_plan,
                                          smooth_endpoint_potential, theta,
                                          theta_antiderivative, theorem2_potential)
from dirac_spectra.spectrum import locate_eigenvalues

from conftest import theorem2_build

PI = math.pi


def _cquad(f, a=0.0, b=PI):
    re = quad(lambda t: f(t).real, a, b, limit=400, epsabs=1e-13)[0]
    im = quad(lambda t: f(t).imag, a, b, limit=400, epsabs=1e-13)[0]
    return re + 1j * im


def test_smooth_endpoint_zero_and_one():
    g = smooth_endpoint_potential(lambda x: np.zeros_like(x), 0.1)
    assert g(0.0) == 0 and g(PI) == pytest.approx(0.1 / 8)
    assert g.l1_error < 0.05
    g1 = smooth_endpoint_potential(lambda x: np.ones_like(x), 0.1)
    assert g1(0.0) == 0 and g1(PI) == pytest.approx(1.0)
    assert g1.l1_error < 0.05 and g1.delta < 0.5
    # C^1: derivative matches finite differences away from the collar edges
    x = np.linspace(0.01, PI - 0.01, 7)
    h = 1e-6
    assert np.allclose(g1.derivative_at(x), (g1(x + h) - g1(x - h)) / (2 * h), atol=1e-5)


def test_fourier_truncate():
    S0, N0 = fourier_truncate(lambda x: np.zeros_like(x), 0.05)
    assert N0 == 0 and len(S0) == 0
    f1 = lambda x: np.sin(x) ** 2 * (0.3 + 0.1 * np.cos(2 * x) + 0.05 * np.sin(6 * x))  # noqa: E731
    SN, N = fourier_truncate(f1, 0.05)
    assert N == 4 and SN.remainder_bound < 0.005
    x = np.linspace(0, PI, 33)
    assert np.abs(SN(x) - f1(x)).max() < 1e-12  # f1 is a trigonometric polynomial of degree 4
    h = 1e-6
    assert np.allclose(SN.derivative_at(x[1:-1]), (SN(x[1:-1] + h) - SN(x[1:-1] - h)) / (2 * h),
                       atol=1e-7)


def test_gap_ratio_example():
    assert full_gap_ratio(4, 0.5, 1.0) == 50800
    plan = lacunary_plan(4, 0.5, 1.0, 2)
    assert plan.C == 50800 and plan.a_seq == (4, 203200) and not plan.desk_scale_flag


def test_desk_plan_and_overflow():
    plan = lacunary_plan(4, 0.05, 1.0, 5, C_override=40)
    assert plan.a_seq == (4, 160, 6400, 256000, 10240000)
    assert plan.desk_scale_flag
    with pytest.raises(PlanOverflowError):
        lacunary_plan(4, 0.05, 1.0, 4)
    with pytest.raises(ValueError):
        lacunary_plan(0, 0.05, 1.0, 2)


def test_single_term_theta_modulus():
    plan = lacunary_plan(4, 0.05, 1.0, 2, C_override=25)
    x = np.linspace(0, PI, 11)
    assert np.allclose(np.abs(theta(x, plan)), 1 / math.sqrt(100))


def test_theta_antiderivative_against_quadrature():
    plan = lacunary_plan(2, 0.05, 1.0, 3, C_override=3, sign=-1)
    A = theta_antiderivative(plan)
    for x in (0.0, 0.7, PI):
        ref = _cquad(lambda t: theta(np.array([t]), plan)[0], 0.0, x) if x else 0
        assert complex(A(x)) == pytest.approx(ref, abs=1e-10)


def test_p_tilde_endpoint_zeros_and_derivative():
    b = theorem2_build()
    P = b.P_tilde
    assert abs(P(0.0)) < 1e-12 and abs(P(PI)) < 1e-12
    x = np.linspace(0.1, 3.0, 9)
    ref = b.S_N.derivative_at(x) + theta(x, b.plan) - b.F0_slope
    assert np.allclose(P.derivative_at(x), ref, atol=1e-10)
    assert b.checks["L1(f1 - P~)"][2]


def test_full_scale_checks_pass():
    from dirac_spectra.counterexample import build_theorem2
    b = build_theorem2(C=None, K=3)
    assert all(ok for _, _, ok in b.checks.values())
    assert b.closeness < 0.025


def test_construction_error_off_desk():
    SN, _ = fourier_truncate(lambda x: np.sin(x) ** 2 + 0.5, 0.05)
    plan = lacunary_plan(4, 0.05, 1.0, 2)
    with pytest.raises(ConstructionError):
        build_p_tilde(SN, plan)  # S_N(0) = 0.5 violates the endpoint bound


def test_integral_estimates_closed_form():
    plan = lacunary_plan(4, 0.05, 1.0, 3, C_override=4, sign=-1)
    eps = 0.01 - 0.002j
    for k in (1, 2):
        est = integral_estimates(plan, k, eps, tau0(1.0))
        lam = tau0(1.0) + 2 * plan.a_seq[k] + eps
        ref = _cquad(lambda t: theta(np.array([t]), plan)[0] * np.exp(2j * lam * t))
        assert est["I0"] == pytest.approx(ref, abs=1e-9)
        assert est["I1"] + est["I2"] == est["I0"]


def test_single_lacunary_term_has_no_cross_sum():
    plan = lacunary_plan(4, 0.05, 1.0, 2, C_override=40, sign=-1)
    est = integral_estimates(plan, 1, 1e-4)
    assert est["I2"] == 0
    assert est["I1_scaled"] == pytest.approx(PI, rel=1e-3)


def test_asymptotic_pair_matches_solver():
    pot = theorem2_build().potential
    md = to_marchenko(pot)
    sp = locate_eigenvalues(pot, periodic_type_matrix(1).minors, [160])
    l1, l2 = sp.pair(160)
    e1, e2 = asymptotic_pair(md, 1.0, 160)
    c = tau0(1.0) + 320
    assert abs(c + e1 - l1) < 1e-5 and abs(c + e2 - l2) < 1e-5


def test_builtin_potential_round_trip():
    pot = theorem2_potential(K=3)
    assert pot.meta["params"]["K"] == 3 and pot.name == "theorem2"
    assert l1_distance(lambda x: 0 * x, pot.Q) > 0
