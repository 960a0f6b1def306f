"""First-order large-``lam`` forms of the fundamental matrix for smooth potentials.

The operator is rotated to the symmetric form ``B~ y' + P~ y = lam y`` with
``p = (P + Q)/2`` and ``r = (P - Q)/(2i)``.  Solutions of the rotated system
have the classical representation through ``u^+-`` and ``sigma^+-`` which is
carried here to order ``1/lam``.  Conventions used throughout:

* ``sigma^+-(lam, x) = (sigma1^+-(x) + sigma~^+-(lam, x)) / (2 i lam)``, the
  small correction, so that the free case gives ``sigma = 0`` and ``w = 2``;
* ``sigma1^+ = iP``, ``sigma1^- = iQ``, ``sigma2^+ = -iP'``, ``sigma2^- = -iQ'``;
* ``e12(pi)`` is driven by ``P`` and ``e21(pi)`` by ``Q``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from dirac_spectra.potentials import Component, ExpPoly, Potential
from dirac_spectra.solver import SolverConfig, endpoint_matrix

PI = math.pi


def derivative_oscillatory(comp: Component, omega: complex, x: float) -> complex:
    """``int_0^x f'(s) exp(i omega s) ds``.

    Exact for exponential polynomials; otherwise integration by parts moves
    the derivative onto the weight so only values of ``f`` are needed.
    """
    if x <= 0:
        return 0j
    if isinstance(comp, ExpPoly):
        return comp.derivative().oscillatory_integral(omega, 0.0, x)
    return complex(comp(x) * np.exp(1j * omega * x) - comp(0.0)
                   - 1j * omega * comp.oscillatory_integral(omega, 0.0, x))


@dataclass(frozen=True)
class MarchenkoData:
    P: Component
    Q: Component

    def p(self, x):
        return 0.5 * (self.P(x) + self.Q(x))

    def r(self, x):
        return (self.P(x) - self.Q(x)) / 2j

    def b1(self, x: float) -> complex:
        """``int_0^x (p^2 + r^2) = int_0^x P Q``."""
        if x <= 0:
            return 0j
        if isinstance(self.P, ExpPoly) and isinstance(self.Q, ExpPoly):
            prod = ExpPoly(np.outer(self.P.coef, self.Q.coef).ravel(),
                           np.add.outer(self.P.omega, self.Q.omega).ravel(),
                           np.add.outer(self.P.power, self.Q.power).ravel())
            return prod.integral(0.0, x)
        nodes, weights = np.polynomial.legendre.leggauss(64)
        t = 0.5 * x * (nodes + 1)
        return complex(0.5 * x * np.sum(weights * self.P(t) * self.Q(t)))

    def sigma1(self, sign: int, x) -> complex:
        return 1j * (self.P(x) if sign > 0 else self.Q(x))

    def sigma2(self, sign: int, x):
        comp = self.P if sign > 0 else self.Q
        return -1j * comp.derivative_at(x)

    def sigma_tilde(self, sign: int, lam: complex, x: float) -> complex:
        """``int_0^x sigma2(x - t) exp(-2 i lam t) dt``."""
        comp = self.P if sign > 0 else self.Q
        return -1j * np.exp(-2j * lam * x) * derivative_oscillatory(comp, 2 * lam, x)

    def sigma(self, sign: int, lam: complex, x: float) -> complex:
        return (self.sigma1(sign, x) + self.sigma_tilde(sign, lam, x)) / (2j * lam)

    def u(self, sign: int, lam: complex, x: float) -> complex:
        return 1 + self.b1(x) / (2j * lam) if sign > 0 else 1 - self.b1(x) / (2j * lam)


def to_marchenko(potential: Potential) -> MarchenkoData:
    for comp in (potential.P, potential.Q):
        if not comp.smooth:
            raise ValueError("asymptotic forms need differentiable P and Q; "
                             "use cubic sample interpolation or a closed form")
    return MarchenkoData(potential.P, potential.Q)


def w_lambda(md: MarchenkoData, lam: complex) -> complex:
    """``2 (1 + sigma^+(-lam, 0) sigma^-(lam, 0))``."""
    return 2.0 * (1.0 + md.sigma(+1, -lam, 0.0) * md.sigma(-1, lam, 0.0))


def yhat(md: MarchenkoData, lam: complex, x: float) -> np.ndarray:
    """Unnormalised rotated solution entries ``[[y11, y12], [y21, y22]]``."""
    ep, em = np.exp(1j * lam * x), np.exp(-1j * lam * x)
    up, um = md.u(+1, lam, x), md.u(-1, lam, x)
    sm_x, sp_x = md.sigma(-1, lam, x), md.sigma(+1, -lam, x)
    sp_0, sm_0 = md.sigma(+1, -lam, 0.0), md.sigma(-1, lam, 0.0)
    A = ep * up
    B = em * um
    y11 = A * (1 + sm_x) * (1 + sp_0) + B * (1 - sp_x) * (1 - sm_0)
    y12 = (-A * (1 - sm_x) * (1 + sp_0) + B * (1 + sp_x) * (1 - sm_0)) / 1j
    y21 = (A * (1 + sm_x) * (1 - sp_0) - B * (1 - sp_x) * (1 + sm_0)) / 1j
    y22 = A * (1 - sm_x) * (1 - sp_0) + B * (1 + sp_x) * (1 + sm_0)
    return np.array([[y11, y12], [y21, y22]], dtype=complex)


def y_to_E(yh: np.ndarray, w: complex) -> np.ndarray:
    """Rotate the symmetric-form solution back to ``E(x, lam)``."""
    y = np.asarray(yh) / w
    y11, y12, y21, y22 = y[0, 0], y[0, 1], y[1, 0], y[1, 1]
    return 0.5 * np.array([
        [y11 + y22 + 1j * (y21 - y12), y11 - y22 - 1j * (y12 + y21)],
        [y11 - y22 + 1j * (y12 + y21), y11 + y22 - 1j * (y21 - y12)],
    ])


def asymptotic_E(md: MarchenkoData, lam: complex, x: float = PI) -> np.ndarray:
    return y_to_E(yhat(md, lam, x), w_lambda(md, lam))


def e12_asym(md: MarchenkoData, lam: complex) -> complex:
    """Leading ``1/lam`` form of ``e12(pi, lam)`` (endpoint values of ``P``)."""
    w = w_lambda(md, lam)
    return (-np.exp(1j * PI * lam) * md.sigma1(+1, 0.0)
            + np.exp(-1j * PI * lam) * (md.sigma1(+1, PI) + md.sigma_tilde(+1, -lam, PI))
            ) / (1j * lam * w)


def e21_asym(md: MarchenkoData, lam: complex) -> complex:
    """Leading ``1/lam`` form of ``e21(pi, lam)`` (endpoint values of ``Q``)."""
    w = w_lambda(md, lam)
    return (np.exp(1j * PI * lam) * (md.sigma1(-1, PI) + md.sigma_tilde(-1, lam, PI))
            - np.exp(-1j * PI * lam) * md.sigma1(-1, 0.0)) / (1j * lam * w)


def endpoint_asym(md: MarchenkoData, lam: complex) -> np.ndarray:
    """Asymptotic ``E(pi, lam)``: rotated form on the diagonal, leading forms off it."""
    E = asymptotic_E(md, lam, PI)
    E[0, 1] = e12_asym(md, lam)
    E[1, 0] = e21_asym(md, lam)
    return E


def fit_order(lams: Sequence[complex], errors: Sequence[float]) -> float:
    """Least-squares decay order ``k`` in ``error ~ |lam|^-k``."""
    x = np.log(np.abs(np.asarray(lams)))
    y = np.log(np.maximum(np.asarray(errors, dtype=float), 1e-300))
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class AsymTable:
    lams: np.ndarray
    abs_err: np.ndarray  # (L, 2, 2)
    rel_err: np.ndarray
    orders: np.ndarray  # (2, 2)

    def to_json(self) -> dict:
        names = ("e11", "e12", "e21", "e22")
        return {
            "lambda": [[complex(l).real, complex(l).imag] for l in self.lams],
            "abs_err": {n: self.abs_err[:, i // 2, i % 2].tolist() for i, n in enumerate(names)},
            "rel_err": {n: self.rel_err[:, i // 2, i % 2].tolist() for i, n in enumerate(names)},
            "fitted_order": {n: float(self.orders[i // 2, i % 2]) for i, n in enumerate(names)},
        }

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["abs_lambda"]
            for n in ("e11", "e12", "e21", "e22"):
                head += [f"abs_{n}", f"rel_{n}"]
            w.writerow(head)
            for k, lam in enumerate(self.lams):
                row = [repr(abs(lam))]
                for i in range(4):
                    row += [repr(float(self.abs_err[k, i // 2, i % 2])),
                            repr(float(self.rel_err[k, i // 2, i % 2]))]
                w.writerow(row)


def compare_asymptotics(potential: Potential, lambda_list: Sequence[complex],
                        config: SolverConfig | None = None) -> AsymTable:
    """Solver endpoint entries against their asymptotic forms."""
    md = to_marchenko(potential)
    lams = np.asarray(lambda_list, dtype=complex)
    batch = endpoint_matrix(potential, lams, order=0, config=config)
    asym = np.array([endpoint_asym(md, l) for l in lams])
    abs_err = np.abs(batch.E - asym)
    scale = np.maximum(np.abs(batch.E), 1e-300)
    rel_err = abs_err / scale
    orders = np.zeros((2, 2))
    if lams.size >= 2:
        for j in range(2):
            for k in range(2):
                orders[j, k] = fit_order(lams, abs_err[:, j, k])
    return AsymTable(lams, abs_err, rel_err, orders)
