import math

import numpy as np
import pytest

from dirac_spectra.asymptotics import (asymptotic_E, compare_asymptotics, e12_asym, e21_asym,
                                       endpoint_asym, fit_order, to_marchenko, w_lambda, y_to_E,
                                       yhat)
from dirac_spectra.core import periodic_type_matrix, tau0
from dirac_spectra.potentials import ExpPoly, Potential, builtin_potential
from dirac_spectra.solver import endpoint_matrix, free_fundamental_matrix

PI = math.pi
LAMS = [tau0(1) + 2 * n for n in (8, 16, 32, 64)]


def test_free_case_is_exact():
    md = to_marchenko(builtin_potential("zero"))
    for lam in (3.0, 7.5 + 0.3j, -20.1):
        assert w_lambda(md, lam) == 2
        E = asymptotic_E(md, lam, 1.1)
        assert np.allclose(E, free_fundamental_matrix(lam, 1.1), atol=1e-14)
        assert E[0, 1] == 0 and E[1, 0] == 0


def test_identity_at_origin(smooth):
    md = to_marchenko(smooth)
    for lam in (9.0, 33.0 + 0.5j):
        assert np.allclose(y_to_E(yhat(md, lam, 0.0), w_lambda(md, lam)), np.eye(2), atol=1e-13)


def test_order_of_agreement(smooth):
    table = compare_asymptotics(smooth, LAMS)
    assert table.orders.min() >= 1.8
    # entries are O(1/lam), the error is O(1/lam^2)
    assert np.all(table.abs_err[-1] < 1e-3)


def test_off_diagonal_leading_size(smooth):
    md = to_marchenko(smooth)
    lam = tau0(1) + 2 * 200
    w = w_lambda(md, lam)
    assert abs(e12_asym(md, lam)) == pytest.approx(abs(smooth.P(PI)) / (abs(lam) * abs(w)), rel=0.02)
    # Q(0) = 0 here, so only the endpoint value at pi contributes
    assert abs(e21_asym(md, lam)) == pytest.approx(abs(smooth.Q(PI)) / (abs(lam) * abs(w)), rel=0.02)


def test_q_zero_kills_e21():
    pot = Potential(ExpPoly([0.4, 0.2j], [0.0, 1.0]), ExpPoly.zero())
    md = to_marchenko(pot)
    for lam in (11.0, 41.0):
        assert e21_asym(md, lam) == 0
        assert abs(endpoint_matrix(pot, [lam]).E[0, 1, 0]) < 1e-12


def test_fit_order():
    lams = np.array([10.0, 20.0, 40.0])
    assert fit_order(lams, 3 * lams ** -2.0) == pytest.approx(2.0)


def test_rejects_sampled_potential():
    class Rough:
        smooth = False

    class Pot:
        P = Q = Rough()

    with pytest.raises(ValueError):
        to_marchenko(Pot())


def test_table_io(tmp_path, smooth):
    table = compare_asymptotics(smooth, LAMS[:2])
    table.write_csv(tmp_path / "a.csv")
    assert "fitted_order" in table.to_json()
    assert len((tmp_path / "a.csv").read_text().splitlines()) == 3
