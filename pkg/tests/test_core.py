import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirac_spectra.core import (BoundaryError, BoundaryMatrix, Minors, boundary_minors, classify,
                                periodic_type_matrix, principal_log, series_base_points, tau0)

from conftest import NONPERIODIC_1, NONPERIODIC_2

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)
cplx = st.builds(complex, finite, finite)
nonzero = cplx.filter(lambda z: abs(z) > 1e-3)


def test_minors_periodic():
    m = periodic_type_matrix(-1).minors
    assert (m.A12, m.A34, m.A14, m.A23, m.A13, m.A24) == (-1, -1, 1, -1, 0, 0)


def test_minors_first_columns_only():
    m = boundary_minors(np.array([[1, 0, 0, 0], [0, 1, 0, 0]]))
    assert m.A12 == 1
    assert all(v == 0 for k, v in m.as_dict().items() if k != "A12")


@given(nonzero)
def test_minors_general_a(a):
    m = periodic_type_matrix(a).minors
    assert m.A12 == pytest.approx(a) and m.A34 == pytest.approx(a)
    assert m.A14 == 1 and m.A23 == pytest.approx(-a * a)
    assert m.A13 == 0 and m.A24 == 0


@given(st.lists(cplx, min_size=8, max_size=8))
def test_minor_antisymmetry(vals):
    A = np.array(vals).reshape(2, 4)
    if np.linalg.matrix_rank(A) < 2:
        return
    m = boundary_minors(A)
    for i in range(1, 5):
        for j in range(1, 5):
            assert m.get(i, j) == -m.get(j, i)
    assert m.A32 + m.A23 == 0 and m.A42 + m.A24 == 0


def test_classify_periodic_and_antiperiodic():
    c = classify(periodic_type_matrix(-1).minors)
    assert c.regular and not c.strongly_regular and c.periodic_type
    assert c.z1 == pytest.approx(1) and c.z2 == pytest.approx(1)
    assert c.subtype == "periodic"
    c = classify(periodic_type_matrix(1).minors)
    assert c.periodic_type and c.z1 == pytest.approx(-1) and c.subtype == "antiperiodic"


def test_classify_strongly_regular():
    c = classify(BoundaryMatrix(np.array([[1, 0, 1, 0], [0, 1, 0, -1]])).minors)
    assert c.regular and c.strongly_regular and not c.periodic_type
    assert {round(c.z1.real), round(c.z2.real)} == {1, -1}


@pytest.mark.parametrize("A", [NONPERIODIC_1, NONPERIODIC_2])
def test_nonperiodic_corpus_is_regular_not_strongly(A):
    c = classify(BoundaryMatrix(A).minors)
    assert c.regular and not c.strongly_regular and not c.periodic_type


def test_irregular_and_rank_deficient():
    c = classify(BoundaryMatrix(np.array([[1, 0, 0, 0], [0, 1, 0, 0]])).minors)
    assert not c.regular
    with pytest.raises(BoundaryError):
        c.require_regular()
    with pytest.raises(BoundaryError):
        BoundaryMatrix(np.array([[1, 0, 0, 0], [2, 0, 0, 0]]))
    with pytest.raises(BoundaryError):
        BoundaryMatrix(np.ones((2, 3)))


@given(st.lists(cplx, min_size=8, max_size=8), st.lists(cplx, min_size=4, max_size=4))
@settings(max_examples=60)
def test_classification_row_invariant(vals, mvals):
    A = np.array(vals).reshape(2, 4)
    M = np.array(mvals).reshape(2, 2)
    if abs(np.linalg.det(M)) < 1e-2 or np.linalg.matrix_rank(A) < 2:
        return
    try:
        c1 = classify(BoundaryMatrix(A).minors)
        c2 = classify(BoundaryMatrix(M @ A).minors)
    except BoundaryError:
        return
    # only compare cases away from the zero-test threshold
    m = BoundaryMatrix(A).minors
    s = m.scale()
    disc = (m.A12 + m.A34) ** 2 + 4 * m.A14 * m.A23
    if min(abs(m.A14 * m.A23), abs(disc)) < 1e-6 * s * s:
        return
    assert c1.regular == c2.regular and c1.strongly_regular == c2.strongly_regular


def test_tau0_examples():
    assert tau0(1) == pytest.approx(1)
    assert tau0(-1) == pytest.approx(2)
    assert tau0(2) == pytest.approx(1 + 1j * math.log(2) / math.pi)
    with pytest.raises(BoundaryError):
        tau0(0)


@given(nonzero)
def test_tau0_solves_grid_equation(a):
    t = tau0(a)
    assert 0 < t.real <= 2 + 1e-12
    assert cmath.exp(1j * math.pi * t) == pytest.approx(-1 / a, rel=1e-9, abs=1e-12)


@given(nonzero)
def test_principal_log_branch(z):
    w = principal_log(z)
    assert -math.pi < w.imag <= math.pi
    assert cmath.exp(w) == pytest.approx(z, rel=1e-12)


def test_series_base_points():
    assert series_base_points(classify(periodic_type_matrix(-1).minors)) == [pytest.approx(2)]
    pts = series_base_points(classify(BoundaryMatrix(np.array([[1, 0, 1, 0], [0, 1, 0, -1]])).minors))
    assert len(pts) == 2


def test_boundary_json_round_trip():
    bm = BoundaryMatrix.from_json({"periodic_type_a": [-1, 0]})
    assert classify(bm.minors).subtype == "periodic"
    again = BoundaryMatrix.from_json(bm.to_json())
    np.testing.assert_allclose(again.entries, bm.entries)
    with pytest.raises(BoundaryError):
        BoundaryMatrix.from_json({"bogus": 1})
