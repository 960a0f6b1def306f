"""Fundamental matrix ``E(x, lam)`` of ``B y' + V y = lam y`` with ``E(0) = I``.

The first-order form is ``y' = A(x, lam) y`` with
``A = [[i lam, -i P], [i Q, -i lam]]``.  Each step applies a fourth-order
Magnus exponential built from the zeroth and first moments of ``A`` over the
step.  Those moments do not depend on ``lam``, so they are computed once and
reused for a whole batch of spectral parameters.  The exponential of a
traceless 2x2 matrix has the closed form ``cosh(r) I + sinh(r)/r Omega`` with
``r^2 = -det Omega``, which also gives exact derivatives in ``lam`` of every
step; chaining them with the product rule yields ``dE/dlam`` and
``d2E/dlam2`` of the discrete solution.

Step size is ``h <= min(h_max, c_step / (1 + |lam|))`` and the step count is
doubled until the Richardson estimate ``|E_2S - E_S| / 15`` meets ``tol``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from dirac_spectra.potentials import Potential

PI = math.pi

_FACT = [math.factorial(k) for k in range(45)]


class SolverError(RuntimeError):
    """Integration failed to reach the tolerance within the step budget."""

    def __init__(self, message: str, estimate: float):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class SolverConfig:
    tol: float = 1e-10
    c_step: float = 0.5
    h_max: float = PI / 32
    max_steps: int = 2 ** 21
    strip_halfwidth: float | None = None
    # cap on (number of lam values) x (number of steps) held in memory at once
    chunk: int = 300_000


DEFAULT_CONFIG = SolverConfig()


# -- single-step exponentials -------------------------------------------------

def _cs_functions(q: np.ndarray, order: int):
    """``C = cosh(sqrt q)``, ``S = sinh(sqrt q)/sqrt q`` and ``dS/dq``, ``d2S/dq2``."""
    C = np.empty_like(q)
    S = np.empty_like(q)
    Sq = np.empty_like(q) if order >= 1 else None
    Sqq = np.empty_like(q) if order >= 2 else None
    small = np.abs(q) < 1.0
    if np.any(small):
        qs = q[small]
        c = np.zeros_like(qs)
        s = np.zeros_like(qs)
        s1 = np.zeros_like(qs)
        s2 = np.zeros_like(qs)
        pw = np.ones_like(qs)  # q^k
        bound = float(np.max(np.abs(qs)))
        n_terms = 3
        while n_terms < 18 and bound ** n_terms / _FACT[2 * n_terms] > 1e-19:
            n_terms += 1
        for k in range(n_terms):
            c += pw / _FACT[2 * k]
            s += pw / _FACT[2 * k + 1]
            if order >= 1:
                s1 += (k + 1) * pw / _FACT[2 * k + 3]
            if order >= 2:
                s2 += (k + 2) * (k + 1) * pw / _FACT[2 * k + 5]
            pw = pw * qs
        C[small], S[small] = c, s
        if order >= 1:
            Sq[small] = s1
        if order >= 2:
            Sqq[small] = s2
    big = ~small
    if np.any(big):
        qb = q[big]
        r = np.sqrt(qb)
        cb = np.cosh(r)
        sb = np.sinh(r) / r
        C[big], S[big] = cb, sb
        if order >= 1:
            s1 = (cb - sb) / (2 * qb)
            Sq[big] = s1
            if order >= 2:
                Sqq[big] = (sb / 2 - 3 * s1) / (2 * qb)
    return C, S, Sq, Sqq


def _assemble(f0, f1, alpha, beta, gamma):
    """``f0 I + f1 [[alpha, beta], [gamma, -alpha]]`` as a stacked 2x2 array."""
    out = np.empty(np.broadcast(f0, f1, alpha, beta, gamma).shape + (2, 2), dtype=complex)
    out[..., 0, 0] = f0 + f1 * alpha
    out[..., 0, 1] = f1 * beta
    out[..., 1, 0] = f1 * gamma
    out[..., 1, 1] = f0 - f1 * alpha
    return out


@dataclass(frozen=True)
class _Steps:
    h: np.ndarray
    b0: np.ndarray
    c0: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    @property
    def n(self) -> int:
        return int(self.h.size)


def _step_data(potential: Potential, x0: np.ndarray, h: np.ndarray) -> _Steps:
    m0P, m1P = potential.P.step_moments(x0, h)
    m0Q, m1Q = potential.Q.step_moments(x0, h)
    b0, c0 = -1j * m0P, 1j * m0Q
    b, c = -1j * m1P, 1j * m1Q
    d = (b * c0 - b0 * c) / h
    return _Steps(h, b0, c0, b, c, d)


def _step_matrices(st: _Steps, lam: np.ndarray, order: int) -> list[np.ndarray]:
    """Step propagators (and their lam-derivatives), shape ``(L, S, 2, 2)``."""
    lam = np.asarray(lam, dtype=complex)[:, None]
    alpha = 1j * lam * st.h + st.d
    beta = st.b0 - 2j * lam * st.b
    gamma = st.c0 + 2j * lam * st.c
    q = alpha * alpha + beta * gamma
    C, S, Sq, Sqq = _cs_functions(q, order)
    out = [_assemble(C, S, alpha, beta, gamma)]
    if order >= 1:
        ap, bp, gp = 1j * st.h, -2j * st.b, 2j * st.c
        qp = 2 * alpha * ap + bp * gamma + beta * gp
        w_part = _assemble(0.0, 1.0, ap, bp, gp)
        out.append(_assemble(0.5 * S * qp, Sq * qp, alpha, beta, gamma)
                   + S[..., None, None] * w_part)
        if order >= 2:
            qpp = -2 * st.h ** 2 + 8 * st.b * st.c
            g0 = 0.5 * Sq * qp * qp + 0.5 * S * qpp
            g1 = Sqq * qp * qp + Sq * qpp
            out.append(_assemble(g0, g1, alpha, beta, gamma)
                       + (2 * Sq * qp)[..., None, None] * w_part)
    return out


def _combine(later: list[np.ndarray], earlier: list[np.ndarray]) -> list[np.ndarray]:
    A, B = later[0], earlier[0]
    out = [A @ B]
    if len(later) > 1:
        out.append(later[1] @ B + A @ earlier[1])
    if len(later) > 2:
        out.append(later[2] @ B + 2 * (later[1] @ earlier[1]) + A @ earlier[2])
    return out


def _reduce_steps(mats: list[np.ndarray], axis: int) -> list[np.ndarray]:
    """Ordered product over ``axis`` (later steps multiply from the left)."""
    mats = [np.moveaxis(m, axis, -3) for m in mats]
    while mats[0].shape[-3] > 1:
        if mats[0].shape[-3] % 2:
            pad = []
            for i, m in enumerate(mats):
                fill = np.zeros(m.shape[:-3] + (1, 2, 2), dtype=complex)
                if i == 0:
                    fill[..., 0, 0] = fill[..., 1, 1] = 1.0
                pad.append(np.concatenate([m, fill], axis=-3))
            mats = pad
        mats = _combine([m[..., 1::2, :, :] for m in mats],
                        [m[..., 0::2, :, :] for m in mats])
    return [m[..., 0, :, :] for m in mats]


# -- free solution ------------------------------------------------------------

def free_fundamental_matrix(lam: complex, x) -> np.ndarray:
    """``diag(exp(i lam x), exp(-i lam x))``; vectorised over ``x``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(1j * lam * x)
    out[..., 1, 1] = np.exp(-1j * lam * x)
    return out


def _free_endpoint(lams: np.ndarray, order: int) -> list[np.ndarray]:
    ep = np.exp(1j * PI * lams)
    em = np.exp(-1j * PI * lams)
    out = []
    for k in range(order + 1):
        m = np.zeros(lams.shape + (2, 2), dtype=complex)
        m[..., 0, 0] = (1j * PI) ** k * ep
        m[..., 1, 1] = (-1j * PI) ** k * em
        out.append(m)
    return out


# -- endpoint solves (batched in lam) ----------------------------------------

@dataclass(frozen=True)
class EndpointBatch:
    """``E(pi, lam)`` and optional lam-derivatives for a batch of ``lam``."""

    lams: np.ndarray
    E: np.ndarray
    dE: np.ndarray | None
    d2E: np.ndarray | None
    est_error: np.ndarray
    n_steps: np.ndarray


def _initial_steps(lam_abs: float, potential: Potential, cfg: SolverConfig) -> int:
    h = min(cfg.h_max, cfg.c_step / (1.0 + lam_abs), potential.max_step)
    return max(4, int(math.ceil(PI / h)))


def _check_strip(lams: np.ndarray, cfg: SolverConfig) -> None:
    if cfg.strip_halfwidth is not None and np.any(np.abs(lams.imag) > cfg.strip_halfwidth):
        raise ValueError(f"|Im lam| exceeds the strip half-width {cfg.strip_halfwidth}")


def _endpoint_fixed(potential: Potential, lams: np.ndarray, n_steps: int, order: int,
                    cfg: SolverConfig) -> list[np.ndarray]:
    edges = np.linspace(0.0, PI, n_steps + 1)
    st = _step_data(potential, edges[:-1], np.diff(edges))
    out = [np.empty(lams.shape + (2, 2), dtype=complex) for _ in range(order + 1)]
    per = max(1, cfg.chunk // n_steps)
    for start in range(0, lams.size, per):
        sl = slice(start, start + per)
        if n_steps > cfg.chunk:
            # long grids: reduce step blocks separately then chain the blocks
            acc = None
            for s0 in range(0, n_steps, cfg.chunk):
                sub = _Steps(*(getattr(st, f)[s0:s0 + cfg.chunk]
                               for f in ("h", "b0", "c0", "b", "c", "d")))
                red = _reduce_steps(_step_matrices(sub, lams[sl], order), axis=1)
                acc = red if acc is None else _combine(red, acc)
            res = acc
        else:
            res = _reduce_steps(_step_matrices(st, lams[sl], order), axis=1)
        for k in range(order + 1):
            out[k][sl] = res[k]
    return out


def endpoint_matrix(potential: Potential, lams, order: int = 0,
                    config: SolverConfig | None = None, tol: float | None = None) -> EndpointBatch:
    """``E(pi, lam)`` for every ``lam`` in ``lams`` with up to two lam-derivatives."""
    cfg = config or DEFAULT_CONFIG
    tol = cfg.tol if tol is None else tol
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    _check_strip(lams, cfg)
    if potential.is_zero:
        res = _free_endpoint(lams, order)
        return EndpointBatch(lams, res[0], res[1] if order >= 1 else None,
                             res[2] if order >= 2 else None,
                             np.zeros(lams.shape), np.zeros(lams.shape, dtype=int))

    result = [np.empty(lams.shape + (2, 2), dtype=complex) for _ in range(order + 1)]
    est = np.full(lams.shape, np.inf)
    steps = np.zeros(lams.shape, dtype=int)
    # group lam values of similar size so each group shares a step count
    base = np.array([_initial_steps(abs(l), potential, cfg) for l in lams])
    for s0 in np.unique(base):
        idx = np.nonzero(base == s0)[0]
        n = int(s0)
        coarse = _endpoint_fixed(potential, lams[idx], n, order, cfg)
        todo = np.arange(idx.size)
        while todo.size:
            if 2 * n > cfg.max_steps:
                worst = float(np.max(est[idx[todo]])) if np.all(np.isfinite(est[idx[todo]])) else math.inf
                raise SolverError(f"tolerance {tol:g} not reached within {cfg.max_steps} steps "
                                  f"(estimate {worst:.3g})", worst)
            fine = _endpoint_fixed(potential, lams[idx[todo]], 2 * n, order, cfg)
            diff = np.max(np.abs(fine[0] - coarse[0]), axis=(-2, -1)) / 15.0
            scale = np.maximum(1.0, np.max(np.abs(fine[0]), axis=(-2, -1)))
            est[idx[todo]] = diff
            ok = diff <= tol * scale
            for k in range(order + 1):
                result[k][idx[todo[ok]]] = fine[k][ok]
            steps[idx[todo[ok]]] = 2 * n
            todo = todo[~ok]
            coarse = [f[~ok] for f in fine]
            n *= 2
    return EndpointBatch(lams, result[0], result[1] if order >= 1 else None,
                         result[2] if order >= 2 else None, est, steps)


# -- dense solves -------------------------------------------------------------

@dataclass(frozen=True)
class FundamentalMatrix:
    """Sampled ``E(x, lam)`` on ``x_grid`` with the endpoint record ``E_end``."""

    lam: complex
    x_grid: np.ndarray
    E: np.ndarray
    est_error: float
    n_steps: int
    potential: Potential = field(repr=False, compare=False)
    config: SolverConfig = field(default=DEFAULT_CONFIG, repr=False, compare=False)

    @property
    def E_end(self) -> np.ndarray:
        return self.E[-1]

    def det_error(self) -> float:
        return float(np.max(np.abs(np.linalg.det(self.E) - 1.0)))

    def at(self, x) -> np.ndarray:
        """``E(x)``: grid lookup, otherwise a fresh integration to ``x``."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(xs.shape + (2, 2), dtype=complex)
        for i, xv in enumerate(xs):
            j = int(np.searchsorted(self.x_grid, xv))
            if j < self.x_grid.size and abs(self.x_grid[j] - xv) <= 1e-14:
                out[i] = self.E[j]
            elif j > 0 and abs(self.x_grid[j - 1] - xv) <= 1e-14:
                out[i] = self.E[j - 1]
            elif xv < 0 or xv > PI:
                raise ValueError(f"x = {xv} lies outside [0, pi]")
            else:
                out[i] = fundamental_matrix(self.potential, self.lam, x_grid=[0.0, xv],
                                            config=self.config).E[-1]
        return out if np.ndim(x) else out[0]

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re_e11", "im_e11", "re_e12", "im_e12",
                        "re_e21", "im_e21", "re_e22", "im_e22"])
            for x, m in zip(self.x_grid, self.E):
                row = [repr(float(x))]
                for v in (m[0, 0], m[0, 1], m[1, 0], m[1, 1]):
                    row += [repr(float(v.real)), repr(float(v.imag))]
                w.writerow(row)


def _dense_fixed(potential: Potential, lam: complex, grid: np.ndarray, k: int) -> np.ndarray:
    m = grid.size - 1
    frac = np.arange(k + 1) / k
    edges = grid[:-1, None] + np.diff(grid)[:, None] * frac  # (m, k+1)
    edges[:, -1] = grid[1:]
    x0 = edges[:, :-1].ravel()
    h = np.diff(edges, axis=1).ravel()
    st = _step_data(potential, x0, h)
    mats = _step_matrices(st, np.array([lam]), 0)[0].reshape(m, k, 2, 2)
    intervals = _reduce_steps([mats], axis=1)[0]
    out = np.empty((m + 1, 2, 2), dtype=complex)
    out[0] = np.eye(2)
    for i in range(m):
        out[i + 1] = intervals[i] @ out[i]
    return out


def fundamental_matrix(potential: Potential, lam: complex, tol: float | None = None,
                       x_grid=None, config: SolverConfig | None = None) -> FundamentalMatrix:
    """Dense fundamental matrix on ``x_grid`` (default 129 uniform points).

    The grid always starts at 0; ``pi`` is appended unless the grid ends
    earlier on purpose (a grid ``[0, x]`` integrates only up to ``x``).
    """
    cfg = config or DEFAULT_CONFIG
    tol = cfg.tol if tol is None else tol
    lam = complex(lam)
    _check_strip(np.array([lam]), cfg)
    grid = np.linspace(0.0, PI, 129) if x_grid is None else np.asarray(x_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("x_grid must be strictly increasing")
    if grid[0] < 0 or grid[-1] > PI + 1e-14:
        raise ValueError("x_grid must lie in [0, pi]")
    if grid[0] > 0:
        grid = np.concatenate([[0.0], grid])
    if grid.size == 1:
        return FundamentalMatrix(lam, grid, np.eye(2, dtype=complex)[None], 0.0, 0,
                                 potential, cfg)
    if potential.is_zero:
        return FundamentalMatrix(lam, grid, free_fundamental_matrix(lam, grid), 0.0, 0,
                                 potential, cfg)
    longest = float(np.max(np.diff(grid)))
    total = _initial_steps(abs(lam), potential, cfg)
    k = max(1, int(math.ceil(total * longest / PI)))
    coarse = _dense_fixed(potential, lam, grid, k)
    est = math.inf
    while True:
        if 2 * k * (grid.size - 1) > cfg.max_steps:
            raise SolverError(f"tolerance {tol:g} not reached within {cfg.max_steps} steps "
                              f"(estimate {est:.3g})", est)
        fine = _dense_fixed(potential, lam, grid, 2 * k)
        est = float(np.max(np.abs(fine - coarse))) / 15.0
        if est <= tol * max(1.0, float(np.max(np.abs(fine)))):
            return FundamentalMatrix(lam, grid, fine, est, 2 * k * (grid.size - 1),
                                     potential, cfg)
        coarse = fine
        k *= 2


# -- bilinear combinations ----------------------------------------------------

@dataclass(frozen=True)
class CalEValues:
    """``cal_E(a, x, lam) = E(x) E(a)^{-1}`` written out entrywise."""

    a: float
    x: float
    values: np.ndarray  # (..., 2, 2)

    def __getitem__(self, jk: tuple[int, int]):
        j, k = jk
        return self.values[..., j - 1, k - 1]


def cal_e_from(Ex: np.ndarray, Ea: np.ndarray) -> np.ndarray:
    """Entrywise definition using ``adj E(a)`` (equal to the inverse when det = 1)."""
    Ex = np.asarray(Ex)
    Ea = np.asarray(Ea)
    out = np.empty(np.broadcast(Ex[..., 0, 0], Ea[..., 0, 0]).shape + (2, 2), dtype=complex)
    for j in range(2):
        out[..., j, 0] = Ex[..., j, 0] * Ea[..., 1, 1] - Ex[..., j, 1] * Ea[..., 1, 0]
        out[..., j, 1] = Ex[..., j, 1] * Ea[..., 0, 0] - Ex[..., j, 0] * Ea[..., 0, 1]
    return out


def cal_e(fm: FundamentalMatrix, a, x) -> CalEValues:
    return CalEValues(a, x, cal_e_from(fm.at(x), fm.at(a)))


def cal_e_free(lam: complex, a, x) -> CalEValues:
    return CalEValues(a, x, cal_e_from(free_fundamental_matrix(lam, x),
                                       free_fundamental_matrix(lam, a)))
