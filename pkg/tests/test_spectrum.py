import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dirac_spectra.core import BoundaryMatrix, periodic_type_matrix
from dirac_spectra.potentials import ExpPoly, Potential, builtin_potential
from dirac_spectra.solver import endpoint_matrix, free_fundamental_matrix
from dirac_spectra.spectrum import (asymptotic_multiplicity_test, delta, delta0, delta0_prime,
                                    delta_prime, locate_eigenvalues, split_indices,
                                    unperturbed_eigenvalues)

from conftest import NONPERIODIC_1, q_only_potential, smooth_spectrum

PI = math.pi
SR = BoundaryMatrix(np.array([[1, 0, 1, 0], [0, 1, 0, -1]])).minors


def test_delta0_examples():
    per = periodic_type_matrix(-1).minors
    lam = 0.37 + 0.2j
    assert delta0(lam, per) == pytest.approx(-2 + cmath.exp(1j * PI * lam) + cmath.exp(-1j * PI * lam))
    assert abs(delta0(0, per)) < 1e-15
    assert abs(delta0(1, periodic_type_matrix(1).minors)) < 1e-15
    assert delta0(lam, SR) == pytest.approx(cmath.exp(1j * PI * lam) - cmath.exp(-1j * PI * lam))
    for k in range(-3, 4):
        assert abs(delta0(k, SR)) < 1e-14
        assert delta0_prime(k, SR) == pytest.approx(2j * PI * (-1) ** k)
        assert abs(delta0_prime(2 * k, per)) < 1e-13


@given(st.floats(-20, 20), st.floats(-2, 2), st.complex_numbers(max_magnitude=3))
@settings(max_examples=30)
def test_delta_free_equals_delta0(re, im, a):
    if abs(a) < 1e-2:
        return
    lam = complex(re, im)
    mn = periodic_type_matrix(a).minors
    E = free_fundamental_matrix(lam, PI)
    assert delta(lam, E, mn) == pytest.approx(delta0(lam, mn), rel=1e-12, abs=1e-12)


def test_delta_periodic_type_form():
    a = 0.7 - 0.4j
    E = endpoint_matrix(builtin_potential("endpoint-smooth"), [3.3 + 0.1j]).E[0]
    val = delta(0, E, periodic_type_matrix(a).minors)
    assert val == pytest.approx(2 * a + a * a * E[0, 0] + E[1, 1], abs=1e-12)


def test_unperturbed_grids():
    per = unperturbed_eigenvalues(periodic_type_matrix(-1).minors, (-3, 3))
    assert all(abs(l - 2 * n - 2) < 1e-12 and m == 2 for n, l, m in per)
    anti = unperturbed_eigenvalues(periodic_type_matrix(1).minors, (-3, 3))
    assert all(round(l.real) % 2 == 1 and abs(l.imag) < 1e-12 and m == 2 for _, l, m in anti)
    sr = unperturbed_eigenvalues(SR, (0, 2))
    assert all(m == 1 for _, _, m in sr)


def test_free_periodic_spectrum():
    sp = locate_eigenvalues(builtin_potential("zero"), periodic_type_matrix(-1).minors, (-5, 5))
    # tau0(-1) = 2, so index n sits at 2 + 2n
    for n in range(-5, 6):
        l1, l2 = sp.pair(n)
        assert abs(l1 - 2 * n - 2) < 1e-10 and abs(l2 - 2 * n - 2) < 1e-10
    assert sp.T_set == [] and all(e.multiplicity == 2 for e in sp.entries)


def test_constant_potential_oracle_periodic():
    p, q = 0.3, 0.2
    pot = Potential(ExpPoly.constant(p), ExpPoly.constant(q))
    sp = locate_eigenvalues(pot, periodic_type_matrix(-1).minors, (-4, 4))
    l1, l2 = sp.pair(-1)
    r = math.sqrt(p * q)
    assert l1 == pytest.approx(-r, abs=1e-9) and l2 == pytest.approx(r, abs=1e-9)
    for k in (1, 2, 3, -2, -3):
        ref = math.copysign(math.sqrt(p * q + 4 * k * k), k)
        n = k - 1
        for lam in sp.pair(n):
            # double roots are resolved to sqrt(noise) accuracy
            assert abs(lam - ref) < 1e-5


def test_smooth_spectrum_residuals_and_decay():
    sp = smooth_spectrum(1, 10)
    assert not sp.failures
    assert max(e.residual for e in sp.entries) < 1e-9
    eps = {}
    for e in sp.entries:
        eps[abs(e.n)] = max(eps.get(abs(e.n), 0), abs(e.eps))
    assert eps[10] < eps[1]
    assert all(abs(e.eps) < 0.5 for e in sp.entries)


def test_delta_prime_methods_agree_and_decay():
    mn = periodic_type_matrix(1).minors
    pot = builtin_potential("endpoint-smooth")
    sp = smooth_spectrum(1, 10)
    vals = []
    for n in (2, 10):
        lam = sp.pair(n)[0]
        v = delta_prime(lam, pot, mn)
        assert v == pytest.approx(delta_prime(lam, pot, mn, "fd"), rel=1e-4, abs=1e-8)
        vals.append(abs(v))
    assert vals[1] < vals[0]


def test_multiplicity_free_and_q_only():
    mn = BoundaryMatrix(NONPERIODIC_1).minors
    sp0 = locate_eigenvalues(builtin_potential("zero"), mn, (-4, 4))
    assert asymptotic_multiplicity_test(sp0).asymptotically_multiple
    spq = locate_eigenvalues(q_only_potential(), mn, (-4, 4))
    v = asymptotic_multiplicity_test(spq)
    assert v.asymptotically_multiple and v.T_set == []


def test_multiplicity_fails_for_split_tail():
    mn = BoundaryMatrix(NONPERIODIC_1).minors
    sp = locate_eigenvalues(builtin_potential("endpoint-smooth"), mn, (4, 8))
    v = asymptotic_multiplicity_test(sp, n0=0)
    assert not v.asymptotically_multiple and v.tail_splits == [4, 5, 6, 7, 8]


def test_split_indices_respect_floor():
    sp = locate_eigenvalues(builtin_potential("zero"), periodic_type_matrix(1).minors, (-2, 2))
    assert split_indices(sp, 1e-8) == []


def test_json_and_csv(tmp_path):
    sp = locate_eigenvalues(builtin_potential("zero"), periodic_type_matrix(-1).minors, (-1, 1))
    sp.write_json(tmp_path / "s.json")
    sp.write_csv(tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 7
