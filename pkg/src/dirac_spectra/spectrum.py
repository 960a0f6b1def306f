"""Characteristic determinants, unperturbed grids and eigenvalue location.

Eigenvalues are counted in disks of radius 1/2 about the unperturbed grid by
the argument principle, then refined.  Pairs of roots in one disk are located
through the critical point of ``Delta`` (a zero of ``Delta'``) and the local
quadratic model there, which stays well conditioned when the pair is nearly
or exactly double.
"""

from __future__ import annotations

import cmath
import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from dirac_spectra.core import (BcClassification, BoundaryError, Minors, SpectrumEntry,
                                classify, complex_to_json, series_base_points)
from dirac_spectra.potentials import Potential
from dirac_spectra.solver import SolverConfig, SolverError, endpoint_matrix

PI = math.pi


# -- determinants ---------------------------------------------------------------

def delta0(lam, minors: Minors):
    """Characteristic determinant of the free operator."""
    lam = np.asarray(lam, dtype=complex)
    val = (minors.A12 + minors.A34 - minors.A23 * np.exp(1j * PI * lam)
           + minors.A14 * np.exp(-1j * PI * lam))
    return val if val.ndim else complex(val)


def delta0_prime(lam, minors: Minors):
    lam = np.asarray(lam, dtype=complex)
    val = -1j * PI * (minors.A23 * np.exp(1j * PI * lam) + minors.A14 * np.exp(-1j * PI * lam))
    return val if val.ndim else complex(val)


def _linear_part(M: np.ndarray, minors: Minors) -> np.ndarray:
    return (minors.A32 * M[..., 0, 0] + minors.A14 * M[..., 1, 1]
            + minors.A13 * M[..., 0, 1] + minors.A42 * M[..., 1, 0])


def delta(lam, E_end: np.ndarray, minors: Minors):
    """``Delta(lam)`` from the endpoint matrix ``E(pi, lam)`` (``lam`` is informational)."""
    val = minors.A12 + minors.A34 + _linear_part(np.asarray(E_end), minors)
    return val if np.ndim(val) else complex(val)


def delta_noise(E_end: np.ndarray, minors: Minors, tol: float) -> np.ndarray:
    """Size of the error in ``Delta`` caused by a solver error ``tol`` in ``E``."""
    scale = np.maximum(1.0, np.max(np.abs(E_end), axis=(-2, -1)))
    weight = abs(minors.A23) + abs(minors.A14) + abs(minors.A13) + abs(minors.A24)
    return 10.0 * tol * scale * weight


@dataclass(frozen=True)
class DeltaValues:
    lams: np.ndarray
    D: np.ndarray
    D1: np.ndarray | None
    D2: np.ndarray | None
    noise: np.ndarray


def characteristic(potential: Potential, minors: Minors, lams, order: int = 1,
                   config: SolverConfig | None = None, tol: float | None = None) -> DeltaValues:
    """``Delta`` and up to two derivatives on a batch of ``lam`` values."""
    cfg = config or SolverConfig()
    batch = endpoint_matrix(potential, lams, order=order, config=cfg, tol=tol)
    D = delta(batch.lams, batch.E, minors)
    D1 = _linear_part(batch.dE, minors) if order >= 1 else None
    D2 = _linear_part(batch.d2E, minors) if order >= 2 else None
    noise = delta_noise(batch.E, minors, cfg.tol if tol is None else tol)
    return DeltaValues(batch.lams, np.atleast_1d(D), D1, D2, noise)


def delta_prime(lam: complex, potential: Potential, minors: Minors, method: str = "variational",
                step: float | None = None, config: SolverConfig | None = None) -> complex:
    """``Delta'(lam)`` from the variational system or by central differences."""
    if method == "variational":
        return complex(characteristic(potential, minors, [lam], 1, config).D1[0])
    if method == "fd":
        h = 1e-5 * (1 + abs(lam)) if step is None else step
        v = characteristic(potential, minors, [lam + h, lam - h], 0, config).D
        return complex((v[0] - v[1]) / (2 * h))
    raise ValueError(f"unknown differentiation method {method!r}")


# -- unperturbed grid -----------------------------------------------------------

def _n_values(n_range) -> list[int]:
    if isinstance(n_range, tuple) and len(n_range) == 2:
        return list(range(int(n_range[0]), int(n_range[1]) + 1))
    return sorted(int(n) for n in n_range)


def unperturbed_eigenvalues(minors: Minors, n_range) -> list[tuple[int, complex, int]]:
    """``(n, lam0, multiplicity)`` for the free operator.

    Periodic-type conditions use the grid ``tau0 + 2n``; otherwise each root
    ``z`` of the quadratic gives ``-(i/pi) Log z + 2n``.  Under the
    non-strong-regularity condition every point is double.
    """
    cls = classify(minors)
    cls.require_regular()
    bases = series_base_points(cls)
    out = []
    for n in _n_values(n_range):
        if len(bases) == 1:
            out.append((n, bases[0] + 2 * n, 2))
        else:
            for b in bases:
                out.append((n, b + 2 * n, 1))
    return out


# -- location -------------------------------------------------------------------

@dataclass(frozen=True)
class LocateConfig:
    tol_root: float = 1e-10
    tol_cluster: float = 1e-8
    radius: float = 0.5
    m_contour: int = 64
    m_max: int = 1024
    contour_tol: float = 1e-8
    newton_max: int = 60
    solver: SolverConfig = field(default_factory=SolverConfig)


@dataclass
class DiskResult:
    n: int
    center: complex
    count: int
    roots: list[complex]
    multiplicity: list[int]
    delta_prime: list[complex]
    residual: list[float]
    circle_max: float
    cluster_floor: float
    message: str = ""


class _DeltaEval:
    """Cached evaluator for one potential/boundary pair."""

    def __init__(self, potential: Potential, minors: Minors, cfg: LocateConfig):
        self.potential, self.minors, self.cfg = potential, minors, cfg

    def __call__(self, lams, order: int, tol: float | None = None) -> DeltaValues:
        return characteristic(self.potential, self.minors, lams, order, self.cfg.solver, tol)


def _winding(ev: _DeltaEval, center: complex, radius: float, cfg: LocateConfig, kmax: int = 6):
    """Winding number and root power sums ``sum (r - center)^k`` on a circle."""
    m = cfg.m_contour
    prev = None
    while True:
        th = 2 * PI * np.arange(m) / m
        pts = center + radius * np.exp(1j * th)
        vals = ev(pts, 1, cfg.contour_tol)
        if np.any(np.abs(vals.D) <= vals.noise):
            return None, None, float(np.max(np.abs(vals.D)))
        ratio = vals.D1 / vals.D
        rel = pts - center
        mus = np.array([np.mean(ratio * rel ** (k + 1)) for k in range(kmax + 1)])
        w = mus[0]
        close = abs(w - round(w.real)) < 0.05
        if close and prev is not None and round(prev.real) == round(w.real):
            return int(round(w.real)), mus, float(np.max(np.abs(vals.D)))
        if close and m >= 2 * cfg.m_contour:
            return int(round(w.real)), mus, float(np.max(np.abs(vals.D)))
        if m >= cfg.m_max:
            if abs(w - round(w.real)) < 0.25:
                return int(round(w.real)), mus, float(np.max(np.abs(vals.D)))
            return None, None, float(np.max(np.abs(vals.D)))
        prev = w if close else None
        m *= 2


def _newton_delta(ev: _DeltaEval, x0: complex, cfg: LocateConfig, limit: complex, rad: float):
    """Damped Newton on ``Delta``; returns ``(root, values)`` or ``None``."""
    x = complex(x0)
    best = None
    settled = 0
    for _ in range(cfg.newton_max):
        v = ev([x], 1)
        D, D1 = complex(v.D[0]), complex(v.D1[0])
        if best is None or abs(D) < abs(best[1].D[0]):
            best = (x, v)
        if abs(D) <= v.noise[0]:
            # one extra step past the noise level, then keep the best iterate
            settled += 1
            if settled > 1:
                return best
        if D1 == 0:
            return best if settled else None
        step = D / D1
        if abs(step) > 0.25 * rad:
            step *= 0.25 * rad / abs(step)
        x -= step
        if abs(x - limit) > rad * 1.2:
            return None
        if abs(step) < 1e-15 * (1 + abs(x)):
            return best
    return best if settled else None


def _newton_critical(ev: _DeltaEval, x0: complex, cfg: LocateConfig, limit: complex, rad: float):
    """Zero of ``Delta'`` by Newton with ``Delta''``."""
    x = complex(x0)
    for _ in range(cfg.newton_max):
        v = ev([x], 2)
        D1, D2 = complex(v.D1[0]), complex(v.D2[0])
        if D2 == 0:
            return None
        step = D1 / D2
        if abs(step) > 0.25 * rad:
            step *= 0.25 * rad / abs(step)
        x -= step
        if abs(x - limit) > rad:
            return None
        if abs(step) < 1e-15 * (1 + abs(x)):
            break
    return x, ev([x], 2)


def _roots_from_power_sums(mus: np.ndarray, k: int) -> np.ndarray:
    """Roots of the monic polynomial whose root power sums are ``mus[1..k]``."""
    e = [1.0 + 0j]
    for j in range(1, k + 1):
        acc = 0j
        for i in range(1, j + 1):
            acc += (-1) ** (i - 1) * e[j - i] * mus[i]
        e.append(acc / j)
    coeffs = [(-1) ** j * e[j] for j in range(k + 1)]
    return np.roots(coeffs)


def _shrink_locate(ev: _DeltaEval, guess: complex, cfg: LocateConfig, rad: float):
    """Argument-principle fallback: shrink a circle onto a single root."""
    c = complex(guess)
    r = rad
    for _ in range(8):
        r /= 4
        count, mus, _ = _winding(ev, c, r, cfg, kmax=1)
        if count != 1:
            return None
        c = c + mus[1]
        if r < 1e-9:
            break
    return c


def _locate_disk(ev: _DeltaEval, n: int, center: complex, expected: int,
                 cfg: LocateConfig) -> DiskResult:
    radius = cfg.radius
    count = mus = None
    circle_max = float("nan")
    for rad in (radius, 0.94 * radius, 1.06 * radius):
        count, mus, circle_max = _winding(ev, center, rad, cfg)
        if count is not None:
            radius = rad
            break
    if count is None:
        return DiskResult(n, center, -1, [], [], [], [], circle_max, 0.0,
                          "winding number did not stabilise")
    if count == 0:
        return DiskResult(n, center, 0, [], [], [], [], circle_max, 0.0)

    floor = 0.0
    roots: list[complex] = []
    mult: list[int] = []
    message = ""
    if count == 2:
        guess = center + mus[1] / 2
        crit = _newton_critical(ev, guess, cfg, center, radius)
        if crit is not None:
            xc, v = crit
            Dc, D2c = complex(v.D[0]), complex(v.D2[0])
            floor = 2.0 * math.sqrt(2.0 * float(v.noise[0]) / max(abs(D2c), 1e-300))
            if abs(Dc) <= v.noise[0]:
                roots, mult = [xc, xc], [2, 2]
            else:
                s = cmath.sqrt(-2.0 * Dc / D2c)
                cands = []
                for sgn in (1, -1):
                    got = _newton_delta(ev, xc + sgn * s, cfg, center, radius)
                    cands.append(got[0] if got is not None else xc + sgn * s)
                if abs(cands[0] - cands[1]) <= max(cfg.tol_cluster, floor):
                    if abs(cands[0] - cands[1]) <= 0.5 * abs(s):
                        cands = [xc + s, xc - s]
                roots = cands
                sep = abs(roots[0] - roots[1])
                mult = [2, 2] if sep <= max(cfg.tol_cluster, floor) else [1, 1]
    if not roots:
        approx = center + _roots_from_power_sums(mus, count)
        for r0 in approx:
            got = _newton_delta(ev, r0, cfg, center, radius)
            if got is None:
                r1 = _shrink_locate(ev, r0, cfg, radius)
                if r1 is None:
                    message = "refinement failed for one root"
                    r1 = complex(r0)
                roots.append(complex(r1))
            else:
                roots.append(got[0])
        mult = [1] * len(roots)
        for i in range(len(roots)):
            for j in range(len(roots)):
                if i != j and abs(roots[i] - roots[j]) <= cfg.tol_cluster:
                    mult[i] += 1
    order = sorted(range(len(roots)), key=lambda i: (roots[i].real, roots[i].imag))
    roots = [roots[i] for i in order]
    mult = [mult[i] for i in order]
    vals = ev(np.array(roots), 1)
    if count != expected and not message:
        message = f"expected {expected} roots, found {count}"
    return DiskResult(n, center, count, roots, mult, list(vals.D1), list(np.abs(vals.D)),
                      circle_max, floor, message)


@dataclass
class Spectrum:
    """Located eigenvalues with their bookkeeping."""

    entries: list[SpectrumEntry]
    T_set: list[int]
    n0: int
    classification: BcClassification
    counts: dict[int, int]
    cluster_floor: dict[int, float]
    failures: dict[int, str]
    config: LocateConfig

    def pair(self, n: int) -> tuple[complex, complex] | None:
        es = [e for e in self.entries if e.n == n]
        if len(es) != 2:
            return None
        return es[0].lam, es[1].lam

    def branch(self, j: int) -> list[SpectrumEntry]:
        return [e for e in self.entries if e.j == j]

    def lambdas(self) -> np.ndarray:
        return np.array([e.lam for e in self.entries])

    def to_json(self) -> dict:
        return {
            "classification": self.classification.to_json(),
            "n0": self.n0,
            "T_set": self.T_set,
            "failures": {str(k): v for k, v in self.failures.items()},
            "config": {"tol_root": self.config.tol_root, "tol_cluster": self.config.tol_cluster,
                       "radius": self.config.radius, "m_contour": self.config.m_contour,
                       "solver_tol": self.config.solver.tol,
                       "c_step": self.config.solver.c_step},
            "entries": [e.to_json() for e in self.entries],
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "j", "re_lambda", "im_lambda", "abs_eps", "multiplicity",
                        "abs_delta_prime", "residual"])
            for e in self.entries:
                w.writerow([e.n, e.j, repr(e.lam.real), repr(e.lam.imag), repr(abs(e.eps)),
                            e.multiplicity, repr(abs(e.delta_prime)), repr(e.residual)])


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DIRAC_SPECTRA_THREADS", "1")))
    except ValueError:
        return 1


def locate_eigenvalues(potential: Potential, minors: Minors, n_range,
                       tol_root: float | None = None,
                       config: LocateConfig | None = None) -> Spectrum:
    """Eigenvalues in the disks about the unperturbed grid for ``n`` in ``n_range``."""
    cfg = config or LocateConfig()
    if tol_root is not None:
        cfg = LocateConfig(**{**cfg.__dict__, "tol_root": tol_root})
    cls = classify(minors)
    cls.require_regular()
    bases = series_base_points(cls)
    ns = _n_values(n_range)
    ev = _DeltaEval(potential, minors, cfg)

    if len(bases) == 1:
        jobs = [(n, bases[0] + 2 * n, 2, None) for n in ns]
    else:
        sep = min(abs((bases[0] - bases[1]) - 2 * k) for k in (-1, 0, 1))
        r = min(cfg.radius, 0.45 * sep)
        sub = LocateConfig(**{**cfg.__dict__, "radius": r})
        ev = _DeltaEval(potential, minors, sub)
        jobs = [(n, b + 2 * n, 1, j) for n in ns for j, b in enumerate(bases, start=1)]

    def work(job):
        n, c, expected, _ = job
        return _locate_disk(ev, n, c, expected, ev.cfg)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(work, jobs))

    entries: list[SpectrumEntry] = []
    counts: dict[int, int] = {}
    floors: dict[int, float] = {}
    failures: dict[int, str] = {}
    T: list[int] = []
    for (n, c, expected, series_j), res in zip(jobs, results):
        counts[n] = counts.get(n, 0) + max(res.count, 0)
        floors[n] = max(floors.get(n, 0.0), res.cluster_floor)
        if res.message:
            failures[n] = res.message
        scale = max(1.0, res.circle_max)
        for i, lam in enumerate(res.roots):
            resid = float(res.residual[i])
            if resid > cfg.tol_root * scale and n not in failures:
                failures[n] = f"residual {resid:.3g} above tol_root"
            j = series_j if series_j is not None else min(i + 1, 2)
            entries.append(SpectrumEntry(n, j, complex(lam), c, complex(lam - c),
                                         res.multiplicity[i], complex(res.delta_prime[i]), resid))
        if series_j is None and len(res.roots) == 2 and res.multiplicity[0] == 1:
            T.append(n)

    bad = [abs(n) for n in ns
           if counts.get(n, 0) != 2 * (1 if len(bases) == 1 else 1)
           or any(abs(e.eps) >= 0.25 for e in entries if e.n == n)]
    n0 = max(bad) if bad else 0
    return Spectrum(entries, sorted(T), n0, cls, counts, floors, failures, cfg)


@dataclass(frozen=True)
class MultiplicityVerdict:
    asymptotically_multiple: bool
    T_set: list[int]
    tail_splits: list[int]
    n0: int
    tol_cluster: float

    def to_json(self) -> dict:
        return {"asymptotically_multiple": self.asymptotically_multiple, "T_set": self.T_set,
                "tail_splits": self.tail_splits, "n0": self.n0, "tol_cluster": self.tol_cluster}


def split_indices(spectrum: Spectrum, tol_cluster: float) -> list[int]:
    """Indices whose two eigenvalues differ by more than the cluster threshold."""
    out = []
    for n in sorted({e.n for e in spectrum.entries}):
        pr = spectrum.pair(n)
        if pr is None:
            continue
        thr = max(tol_cluster, spectrum.cluster_floor.get(n, 0.0))
        if abs(pr[0] - pr[1]) > thr:
            out.append(n)
    return out


def asymptotic_multiplicity_test(spectrum: Spectrum, tol_cluster: float = 1e-8,
                                 n0: int | None = None) -> MultiplicityVerdict:
    """True when no pair beyond ``n0`` splits by more than ``tol_cluster``."""
    n0 = spectrum.n0 if n0 is None else n0
    T = split_indices(spectrum, tol_cluster)
    tail = [n for n in T if abs(n) > n0]
    return MultiplicityVerdict(not tail, T, tail, n0, tol_cluster)
