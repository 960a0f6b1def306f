"""Closed forms used as independent references (no package imports)."""

import cmath
import math

import numpy as np


def constant_E(p: complex, q: complex, lam: complex, x: float) -> np.ndarray:
    """E(x) for constant P = p, Q = q.

    The first-order matrix A = [[i lam, -i p], [i q, -i lam]] squares to
    mu^2 I with mu^2 = pq - lam^2, so exp(A x) = cosh(mu x) I + sinh(mu x)/mu A.
    """
    A = np.array([[1j * lam, -1j * p], [1j * q, -1j * lam]])
    mu = cmath.sqrt(p * q - lam * lam)
    c = cmath.cosh(mu * x)
    s = x if abs(mu) < 1e-300 else cmath.sinh(mu * x) / mu
    return c * np.eye(2) + s * A


def constant_periodic_type_eigenvalues(p: complex, q: complex, a: complex, ks) -> list[complex]:
    """Eigenvalues of the constant potential under [[1,0,a,0],[0,a,0,1]].

    The characteristic equation is a^2 e11 + 2a + e22 = 0.  For a = +-1 it
    becomes trace E(pi) = -2a, i.e. cosh(mu pi) = -a, so mu = i k with k of
    the matching parity and lam^2 = pq + k^2.
    """
    out = []
    if a == -1:
        base = [2 * k for k in ks]
    elif a == 1:
        base = [2 * k + 1 for k in ks]
    else:
        raise ValueError("oracle covers a = +-1 only")
    for k in base:
        r = cmath.sqrt(p * q + k * k)
        out.extend([r, -r] if k != 0 else [r])
    return out


def free_eigenvalues_periodic(n: int) -> complex:
    return 2.0 * n


def phase_integral(omega: complex, L: float = math.pi) -> complex:
    if omega == 0:
        return L
    return (cmath.exp(1j * omega * L) - 1) / (1j * omega)
