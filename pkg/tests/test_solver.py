import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from dirac_spectra.potentials import ExpPoly, Potential, builtin_potential
from dirac_spectra.solver import (SolverConfig, SolverError, cal_e, cal_e_free, endpoint_matrix,
                                  free_fundamental_matrix, fundamental_matrix)

from oracles import constant_E

PI = math.pi


def const_pot(p, q):
    return Potential(ExpPoly.constant(p), ExpPoly.constant(q))


def test_free_examples():
    np.testing.assert_allclose(free_fundamental_matrix(2, PI), np.eye(2), atol=1e-14)
    np.testing.assert_allclose(free_fundamental_matrix(1j, PI), np.diag([math.exp(-PI), math.exp(PI)]))
    np.testing.assert_allclose(free_fundamental_matrix(0, 1.3), np.eye(2))


def test_zero_potential_is_free():
    fm = fundamental_matrix(builtin_potential("zero"), 3.7 - 0.4j)
    for x, E in zip(fm.x_grid, fm.E):
        np.testing.assert_allclose(E, free_fundamental_matrix(3.7 - 0.4j, x), atol=1e-13)
    fm = fundamental_matrix(builtin_potential("zero"), 0)
    np.testing.assert_allclose(fm.E, np.broadcast_to(np.eye(2), fm.E.shape), atol=1e-15)


@given(st.complex_numbers(max_magnitude=1.5), st.complex_numbers(max_magnitude=1.5),
       st.floats(-30, 30), st.floats(-2, 2))
@settings(max_examples=25, deadline=None)
def test_constant_potential_oracle(p, q, re, im):
    lam = complex(re, im)
    fm = fundamental_matrix(const_pot(p, q), lam, tol=1e-12)
    for k in (16, 64, 128):
        ref = constant_E(p, q, lam, fm.x_grid[k])
        assert np.max(np.abs(fm.E[k] - ref)) <= 1e-8 * max(1, np.max(np.abs(ref)))


def test_against_solve_ivp():
    pot = builtin_potential("endpoint-smooth")
    lam = 7.3 + 0.6j

    def rhs(x, y):
        A = np.array([[1j * lam, -1j * pot.P(x)], [1j * pot.Q(x), -1j * lam]])
        return (A @ y.reshape(2, 2)).ravel()

    ref = solve_ivp(rhs, (0, PI), np.eye(2, dtype=complex).ravel(), rtol=1e-12, atol=1e-13,
                    method="DOP853").y[:, -1].reshape(2, 2)
    E = endpoint_matrix(pot, [lam], config=SolverConfig(tol=1e-12)).E[0]
    np.testing.assert_allclose(E, ref, atol=1e-9)


def test_determinant_and_initial_value():
    fm = fundamental_matrix(builtin_potential("endpoint-smooth"), 12.1 + 1.1j)
    np.testing.assert_array_equal(fm.E[0], np.eye(2))
    assert fm.det_error() < 1e-10


def test_lambda_derivatives_match_differences():
    pot = builtin_potential("endpoint-smooth")
    lam, h = 5.2 + 0.3j, 1e-4
    cfg = SolverConfig(tol=1e-13)
    b = endpoint_matrix(pot, [lam], order=2, config=cfg)
    Ep = endpoint_matrix(pot, [lam + h], config=cfg).E[0]
    Em = endpoint_matrix(pot, [lam - h], config=cfg).E[0]
    np.testing.assert_allclose(b.dE[0], (Ep - Em) / (2 * h), atol=1e-7)
    np.testing.assert_allclose(b.d2E[0], (Ep - 2 * b.E[0] + Em) / h ** 2, atol=1e-4)


def test_error_estimate_reported():
    b = endpoint_matrix(builtin_potential("endpoint-smooth"), [40.0, 80.0 + 1j])
    assert np.all(b.est_error <= 1e-10 * np.maximum(1, np.max(np.abs(b.E), axis=(1, 2))))


def test_step_budget_error():
    with pytest.raises(SolverError):
        endpoint_matrix(builtin_potential("endpoint-smooth"), [5000.0],
                        config=SolverConfig(max_steps=64))


def test_cal_e_identities():
    pot = builtin_potential("endpoint-smooth")
    fm = fundamental_matrix(pot, 4.4 + 0.2j)
    x = fm.x_grid[40]
    assert cal_e(fm, x, x)[1, 1] == pytest.approx(1, abs=1e-10)
    assert cal_e(fm, x, x)[2, 2] == pytest.approx(1, abs=1e-10)
    lam = 3.1 + 0.5j
    free = cal_e_free(lam, 0.4, 2.0)
    assert free[1, 1] == pytest.approx(np.exp(1j * lam * 1.6))
    assert free[1, 2] == 0
