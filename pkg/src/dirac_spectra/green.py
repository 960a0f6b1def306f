"""Green kernel numerator ``H(t, x, lam)``, the Green function and residues.

``H`` is sampled on a uniform ``m x m`` lattice of ``(t, x)`` built from one
dense fundamental-matrix solve.  ``G = iH/Delta - i chi_{t>x} J(cal_E(t, x))``
where ``J`` flips the sign of the second column; with this ``G`` the function
``u(x) = int G(t, x) f(t) dt`` solves ``L u - lam u = f`` and the boundary
conditions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import simpson

from dirac_spectra.core import Minors
from dirac_spectra.potentials import Potential
from dirac_spectra.solver import (FundamentalMatrix, SolverConfig, cal_e_from,
                                  free_fundamental_matrix, fundamental_matrix)
from dirac_spectra.spectrum import characteristic, delta, delta0

PI = math.pi


class PoleProximityError(ValueError):
    """``Delta(lam)`` is too small to divide by: ``lam`` is (nearly) an eigenvalue."""


def _flip(M: np.ndarray) -> np.ndarray:
    out = np.array(M, dtype=complex, copy=True)
    out[..., :, 1] *= -1
    return out


def simpson_weights(m: int) -> np.ndarray:
    """Composite Simpson weights on ``m`` (odd) uniform points of [0, pi]."""
    if m < 3 or m % 2 == 0:
        raise ValueError("Simpson's rule needs an odd number of points >= 3")
    w = np.ones(m)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (PI / (m - 1)) / 3.0


def _h_entries(ce_tx: np.ndarray, ce_px: np.ndarray, Et: np.ndarray, mn: Minors) -> np.ndarray:
    """Entrywise kernel numerator from ``cal_E(t, x)``, ``cal_E(pi, x)`` and ``E(t)``."""
    e11, e12, e21, e22 = Et[..., 0, 0], Et[..., 0, 1], Et[..., 1, 0], Et[..., 1, 1]
    out = np.empty(np.broadcast(ce_tx[..., 0, 0], ce_px[..., 0, 0], e11).shape + (2, 2),
                   dtype=complex)
    for j in range(2):
        c1 = mn.A14 * ce_px[..., j, 0] - mn.A13 * ce_px[..., j, 1]
        c2 = mn.A24 * ce_px[..., j, 0] - mn.A23 * ce_px[..., j, 1]
        out[..., j, 0] = mn.A12 * ce_tx[..., j, 0] + c1 * e22 - c2 * e21
        out[..., j, 1] = -mn.A12 * ce_tx[..., j, 1] + c1 * e12 - c2 * e11
    return out


def h_from_matrices(Et: np.ndarray, Ex: np.ndarray, Epi: np.ndarray, mn: Minors) -> np.ndarray:
    """``H`` for given ``E(t)``, ``E(x)`` and ``E(pi)`` (broadcasting over leading axes)."""
    return _h_entries(cal_e_from(Ex, Et), cal_e_from(Ex, Epi), Et, mn)


def h_product_form(Et: np.ndarray, Ex: np.ndarray, Epi: np.ndarray, mn: Minors) -> np.ndarray:
    """The same numerator assembled as a product of three 2x2 matrices."""
    amat = np.array([[mn.A14, mn.A24], [mn.A13, mn.A23]], dtype=complex)
    right = np.empty(np.shape(Et), dtype=complex)
    right[..., 0, 0] = Et[..., 1, 1]
    right[..., 0, 1] = Et[..., 0, 1]
    right[..., 1, 0] = -Et[..., 1, 0]
    right[..., 1, 1] = -Et[..., 0, 0]
    return (mn.A12 * _flip(cal_e_from(Ex, Et))
            + _flip(cal_e_from(Ex, Epi)) @ amat @ right)


def h_matrix(t, x, lam: complex, E: FundamentalMatrix, minors: Minors) -> np.ndarray:
    """``H(t, x, lam)`` at scalar or array ``t``, ``x`` (``E`` must be at ``lam``)."""
    if abs(complex(lam) - E.lam) > 1e-14 * (1 + abs(lam)):
        raise ValueError("fundamental matrix was computed at a different lambda")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tb, xb = np.broadcast_arrays(t, x)
    Et = E.at(tb.ravel()).reshape(tb.shape + (2, 2))
    Ex = E.at(xb.ravel()).reshape(xb.shape + (2, 2))
    out = h_from_matrices(Et, Ex, E.E_end, minors)
    return out if out.ndim > 2 else out.reshape(2, 2)


def h0_matrix(t, x, lam: complex, minors: Minors) -> np.ndarray:
    """Closed-form numerator of the free problem."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    shape = np.broadcast(t, x).shape
    out = np.empty(shape + (2, 2), dtype=complex)
    mn = minors
    out[..., 0, 0] = np.exp(1j * lam * (x - t)) * (mn.A12 + mn.A14 * np.exp(-1j * PI * lam))
    out[..., 0, 1] = -mn.A24 * np.exp(1j * lam * (x - PI + t))
    out[..., 1, 0] = -mn.A13 * np.exp(1j * lam * (PI - x - t))
    out[..., 1, 1] = np.exp(1j * lam * (t - x)) * (-mn.A12 + mn.A23 * np.exp(1j * PI * lam))
    return out


def _jump_part(Et: np.ndarray, Ex: np.ndarray) -> np.ndarray:
    return _flip(cal_e_from(Ex, Et))


def green(t, x, lam: complex, E: FundamentalMatrix, minors: Minors,
          pole_tol: float = 1e-12) -> np.ndarray:
    """Green function; on the diagonal ``t = x`` the mean of both one-sided limits."""
    D = delta(lam, E.E_end, minors)
    if abs(D) <= pole_tol:
        raise PoleProximityError(f"|Delta(lam)| = {abs(D):.3g} is below {pole_tol:g}")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tb, xb = np.broadcast_arrays(t, x)
    Et = E.at(tb.ravel()).reshape(tb.shape + (2, 2))
    Ex = E.at(xb.ravel()).reshape(xb.shape + (2, 2))
    H = h_from_matrices(Et, Ex, E.E_end, minors)
    chi = np.where(tb > xb, 1.0, np.where(tb == xb, 0.5, 0.0))
    out = 1j * H / D - 1j * chi[..., None, None] * _jump_part(Et, Ex)
    return out if out.ndim > 2 else out.reshape(2, 2)


def green_free(t, x, lam: complex, minors: Minors) -> np.ndarray:
    D0 = delta0(lam, minors)
    if abs(D0) <= 1e-14:
        raise PoleProximityError("lam is an eigenvalue of the free problem")
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    tb, xb = np.broadcast_arrays(t, x)
    chi = np.where(tb > xb, 1.0, np.where(tb == xb, 0.5, 0.0))
    jump = np.zeros(tb.shape + (2, 2), dtype=complex)
    jump[..., 0, 0] = np.exp(1j * lam * (xb - tb))
    jump[..., 1, 1] = -np.exp(1j * lam * (tb - xb))
    return 1j * h0_matrix(tb, xb, lam, minors) / D0 - 1j * chi[..., None, None] * jump


def green_one_sided(x: float, lam: complex, E: FundamentalMatrix, minors: Minors,
                    side: int) -> np.ndarray:
    """Limit of ``G(t, x)`` as ``t -> x`` from above (``side=+1``) or below."""
    D = delta(lam, E.E_end, minors)
    Ex = E.at(x)
    H = h_from_matrices(Ex, Ex, E.E_end, minors)
    G = 1j * H / D
    if side > 0:
        G = G - 1j * _jump_part(Ex, Ex)
    return G


@dataclass(frozen=True)
class KernelGrid:
    """``values[i, k]`` is the kernel at ``(t_i, x_k)``."""

    lam: complex
    grid: np.ndarray
    values: np.ndarray
    kind: str = "H"
    diag_plus: np.ndarray | None = None
    diag_minus: np.ndarray | None = None

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["t", "x"]
            for n in ("11", "12", "21", "22"):
                head += [f"re_{n}", f"im_{n}"]
            w.writerow(head)
            for i, t in enumerate(self.grid):
                for k, x in enumerate(self.grid):
                    v = self.values[i, k]
                    row = [repr(float(t)), repr(float(x))]
                    for z in (v[0, 0], v[0, 1], v[1, 0], v[1, 1]):
                        row += [repr(float(z.real)), repr(float(z.imag))]
                    w.writerow(row)


def dense_solution(potential: Potential, lam: complex, m: int = 129,
                   config: SolverConfig | None = None) -> FundamentalMatrix:
    return fundamental_matrix(potential, lam, x_grid=np.linspace(0.0, PI, m), config=config)


def kernel_grid(E: FundamentalMatrix, minors: Minors, kind: str = "H") -> KernelGrid:
    """``H`` (or the full Green function for ``kind="G"``) on ``E.x_grid`` squared."""
    Es = E.E
    Et = Es[:, None]
    Ex = Es[None, :]
    H = h_from_matrices(Et, Ex, E.E_end, minors)
    if kind == "H":
        return KernelGrid(E.lam, E.x_grid, H, "H")
    if kind != "G":
        raise ValueError("kind must be 'H' or 'G'")
    D = delta(E.lam, E.E_end, minors)
    if abs(D) <= 1e-12:
        raise PoleProximityError(f"|Delta(lam)| = {abs(D):.3g}")
    jump = _jump_part(Et, Ex)
    n = Es.shape[0]
    ti, xi = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    G = 1j * H / D - 1j * (ti > xi)[..., None, None] * jump
    diag_minus = np.array([1j * H[i, i] / D for i in range(n)])
    diag_plus = np.array([diag_minus[i] - 1j * jump[i, i] for i in range(n)])
    G[np.arange(n), np.arange(n)] = 0.5 * (diag_plus + diag_minus)
    return KernelGrid(E.lam, E.x_grid, G, "G", diag_plus, diag_minus)


def hjk_norms(lambda_n: complex, E: FundamentalMatrix, minors: Minors,
              m: int | None = None) -> np.ndarray:
    """``||h_jk(., ., lambda_n)||`` in ``L2`` of the square, by tensor Simpson."""
    if m is not None and E.x_grid.size != m:
        E = fundamental_matrix(E.potential, lambda_n, x_grid=np.linspace(0.0, PI, m),
                               config=E.config)
    H = kernel_grid(E, minors).values
    w = simpson_weights(E.x_grid.size)
    ww = np.outer(w, w)
    return np.sqrt(np.einsum("ik,ikab->ab", ww, np.abs(H) ** 2))


def h0_norms(lam: complex, minors: Minors, m: int = 129) -> np.ndarray:
    g = np.linspace(0.0, PI, m)
    H = h0_matrix(g[:, None], g[None, :], lam, minors)
    w = simpson_weights(m)
    return np.sqrt(np.einsum("ik,ikab->ab", np.outer(w, w), np.abs(H) ** 2))


class FactorizationError(RuntimeError):
    def __init__(self, message: str, sv_ratio: float):
        super().__init__(message)
        self.sv_ratio = sv_ratio


@dataclass(frozen=True)
class ResiduePair:
    lam: complex
    x: np.ndarray
    y: np.ndarray  # (m, 2)
    z: np.ndarray  # (m, 2)
    norm_product: float
    frobenius: float
    sv_ratio: float
    pairing: complex
    delta_prime: complex

    def to_json(self) -> dict:
        return {"lambda": [self.lam.real, self.lam.imag], "norm_product": self.norm_product,
                "frobenius": self.frobenius, "sv_ratio": self.sv_ratio,
                "pairing": [self.pairing.real, self.pairing.imag],
                "abs_delta_prime": abs(self.delta_prime)}


def residue_pair(lambda_n: complex, E: FundamentalMatrix, minors: Minors,
                 delta_prime: complex | None = None, tol_rank: float = 1e-6) -> ResiduePair:
    """Rank-one factorisation of the residue ``i H(t, x) / Delta'(lambda_n)``.

    The leading singular pair of the quadrature-weighted kernel gives ``y`` and
    ``z`` with ``||y|| = ||z||``; their product is the weighted Frobenius norm.
    ``G`` is the kernel of ``(L - lam)^{-1}``, whose residue is minus the
    spectral projection, so ``y(x) conj(z(t)) = -i H / Delta'`` and the pair
    satisfies ``<y, z> = 1``.
    """
    if delta_prime is None:
        delta_prime = complex(characteristic(E.potential, minors, [lambda_n], 1,
                                             E.config).D1[0])
    H = kernel_grid(E, minors).values
    m = E.x_grid.size
    w = simpson_weights(m)
    sw = np.sqrt(w)
    K = 1j * H / delta_prime  # K[t, x, j, k] = y_j(x) conj(z_k(t))
    # rows (j, x), columns (k, t)
    mat = np.transpose(K, (2, 1, 3, 0)).reshape(2 * m, 2 * m)
    wrow = np.tile(sw, 2)
    mat_w = wrow[:, None] * mat * wrow[None, :]
    U, s, Vh = np.linalg.svd(mat_w)
    ratio = float(s[1] / s[0]) if s[0] > 0 else math.inf
    frob = float(np.sqrt(np.sum(np.abs(hjk_norms(lambda_n, E, minors)) ** 2)) / abs(delta_prime))
    if ratio > tol_rank:
        raise FactorizationError(f"kernel is not rank one (sigma2/sigma1 = {ratio:.3g})", ratio)
    root = math.sqrt(s[0])
    y = (root * U[:, 0] / wrow).reshape(2, m).T
    z = -(root * np.conj(Vh[0]) / wrow).reshape(2, m).T
    pairing = complex(np.sum(w[:, None] * y * np.conj(z)))
    return ResiduePair(complex(lambda_n), E.x_grid, y, z, float(s[0]), frob, ratio,
                       pairing, complex(delta_prime))


def write_norm_report(path: str | Path, rows: list[dict]) -> None:
    Path(path).write_text(json.dumps(rows, indent=2))
