"""Riesz-basis diagnostics: eigenfunctions, biorthogonal partners, ratio tests.

For periodic-type conditions two equivalent ratio tests are offered: the
eigenvector coefficient ratio ``|alpha/beta|`` along the first branch and the
endpoint ratio ``|e12(pi)| / |e21(pi)|``.  On the characteristic equation
``|alpha/beta| = |a| sqrt(|e12| / |e21|)``, so a band of width ``c`` for the
second corresponds to width ``sqrt(c)`` for the first.  For the remaining
non-strongly-regular conditions the verdict is asymptotic multiplicity,
cross-checked with residue norm products.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.integrate import simpson

from dirac_spectra.core import BcClassification, BoundaryError, BoundaryMatrix, Minors
from dirac_spectra.green import FactorizationError, dense_solution, residue_pair
from dirac_spectra.potentials import Potential
from dirac_spectra.solver import FundamentalMatrix, SolverConfig, endpoint_matrix
from dirac_spectra.spectrum import Spectrum, asymptotic_multiplicity_test, split_indices

PI = math.pi


class DegenerateEigenvectorError(ValueError):
    pass


class PairingError(ValueError):
    """``int y1 y2`` vanishes numerically, so no biorthogonal scale exists."""


def inner(u: np.ndarray, v: np.ndarray, x: np.ndarray) -> complex:
    """``<u, v> = int (u1 conj(v1) + u2 conj(v2)) dx`` on the sample grid."""
    return complex(simpson(np.sum(u * np.conj(v), axis=-1), x=x))


def norm(u: np.ndarray, x: np.ndarray) -> float:
    return math.sqrt(max(inner(u, u, x).real, 0.0))


def exp_norm_integrals(lam: complex) -> tuple[float, float]:
    """``int_0^pi exp(-2 Im(lam) x) dx`` and ``int_0^pi exp(2 Im(lam) x) dx``."""
    s = lam.imag
    if abs(s) < 1e-12:
        return PI, PI
    return ((1 - math.exp(-2 * PI * s)) / (2 * s), (math.exp(2 * PI * s) - 1) / (2 * s))


@dataclass(frozen=True)
class EigenfunctionRecord:
    n: int
    j: int
    lam: complex
    alpha: complex
    beta: complex
    x: np.ndarray | None = field(default=None, repr=False)
    y: np.ndarray | None = field(default=None, repr=False)
    gamma: complex | None = None
    z: np.ndarray | None = field(default=None, repr=False)
    h_int: float = PI
    g_int: float = PI
    D: complex | None = None

    @property
    def y_norm(self) -> float:
        return norm(self.y, self.x)

    @property
    def pair_integral(self) -> complex:
        return complex(simpson(self.y[:, 0] * self.y[:, 1], x=self.x))

    @property
    def norm_product(self) -> float:
        if self.z is not None:
            return self.y_norm * norm(self.z, self.x)
        if self.gamma is None:
            raise ValueError("biorthogonal scale not computed")
        return abs(self.gamma) * self.y_norm ** 2

    @property
    def ratio(self) -> float:
        return abs(self.alpha) / abs(self.beta) if self.beta != 0 else math.inf


def _coefficients(c1: complex, c2: complex) -> tuple[complex, complex]:
    s = math.hypot(abs(c1), abs(c2))
    return c1 / s, c2 / s


def eigenfunction_periodic_type(lambda_n1: complex, E: FundamentalMatrix | np.ndarray,
                                a: complex, n: int = 0, j: int = 1,
                                tol: float = 1e-12) -> EigenfunctionRecord:
    """Eigenfunction ``(a + e22) u1 - e21 u2`` built from the second boundary form.

    ``E`` may be a dense solution (the eigenfunction is then sampled) or only
    the endpoint matrix ``E(pi)`` (coefficients only).
    """
    Epi = E.E_end if isinstance(E, FundamentalMatrix) else np.asarray(E)
    c1 = a + Epi[1, 1]
    c2 = -Epi[1, 0]
    if max(abs(c1), abs(c2)) <= tol:
        raise DegenerateEigenvectorError(
            "both eigenvector coefficients vanish (eigenvalue of geometric multiplicity two?)")
    alpha, beta = _coefficients(c1, c2)
    D = -Epi[0, 1] * Epi[1, 0]
    h, g = exp_norm_integrals(complex(lambda_n1))
    if isinstance(E, FundamentalMatrix):
        y = E.E @ np.array([alpha, beta])
        return EigenfunctionRecord(n, j, complex(lambda_n1), alpha, beta, E.x_grid, y,
                                   h_int=h, g_int=g, D=complex(D))
    return EigenfunctionRecord(n, j, complex(lambda_n1), alpha, beta, h_int=h, g_int=g,
                               D=complex(D))


def eigenspace(lam: complex, E: FundamentalMatrix, bm: BoundaryMatrix, n: int = 0,
               tol: float = 1e-7) -> list[EigenfunctionRecord]:
    """Eigenfunctions from the null space of ``C + D E(pi)``.

    A two-dimensional null space is returned as an orthonormal pair in ``H``.
    """
    N = bm.C + bm.D @ E.E_end
    _, s, Vh = np.linalg.svd(N)
    scale = max(1.0, float(np.max(np.abs(bm.entries))) * max(1.0, float(np.max(np.abs(E.E_end)))))
    dim = int(np.sum(s <= tol * scale))
    if dim == 0:
        dim = 1
    vecs = [np.conj(Vh[-k - 1]) for k in range(dim)]
    h, g = exp_norm_integrals(complex(lam))
    ys = [E.E @ v for v in vecs]
    if dim == 2:
        # Gram-Schmidt in H so the pair is orthonormal
        y0 = ys[0] / norm(ys[0], E.x_grid)
        y1 = ys[1] - inner(ys[1], y0, E.x_grid) * y0
        y1 = y1 / norm(y1, E.x_grid)
        ys = [y0, y1]
        vecs = [y0[0], y1[0]]
    out = []
    for k, (v, y) in enumerate(zip(vecs, ys), start=1):
        al, be = _coefficients(v[0], v[1])
        out.append(EigenfunctionRecord(n, k, complex(lam), al, be, E.x_grid, y,
                                       h_int=h, g_int=g))
    return out


def gamma_normalization(rec: EigenfunctionRecord, tol_pair: float = 1e-12) -> complex:
    """``gamma`` with ``conj(gamma) int y1 y2 = 1/2``."""
    I = rec.pair_integral
    if abs(I) < tol_pair:
        raise PairingError(f"|int y1 y2| = {abs(I):.3g} below {tol_pair:g}")
    return complex(np.conj(1.0 / (2.0 * I)))


def with_partner(rec: EigenfunctionRecord, tol_pair: float = 1e-12) -> EigenfunctionRecord:
    """Attach ``gamma`` and ``z = gamma (conj y2, conj y1)``."""
    g = gamma_normalization(rec, tol_pair)
    z = g * np.conj(rec.y[:, ::-1])
    return replace(rec, gamma=g, z=z)


def dual_partners(records: Sequence[EigenfunctionRecord]) -> list[EigenfunctionRecord]:
    """Biorthogonal partners for one eigenspace of the periodic-type problem.

    Adjoint eigenfunctions are ``(conj y2, conj y1)``; the partners are the dual
    basis with respect to the Gram matrix ``<y_i, adjoint_k>``.
    """
    x = records[0].x
    adj = [np.conj(r.y[:, ::-1]) for r in records]
    G = np.array([[inner(r.y, ak, x) for ak in adj] for r in records])
    coef = np.linalg.inv(G).conj().T  # z_i = sum_k coef[i, k] adj_k
    out = []
    for i, r in enumerate(records):
        z = sum(coef[i, k] * adj[k] for k in range(len(adj)))
        out.append(replace(r, z=z))
    return out


# -- band verdicts ----------------------------------------------------------------

@dataclass(frozen=True)
class BasisVerdict:
    mode: str
    is_riesz: bool | None
    inconclusive: bool
    ratio_series: list[tuple[int, float]]
    blowup_witness: list[int] | None
    band: float
    spread: float
    notes: str = ""
    norm_products: list[tuple[int, float]] = field(default_factory=list)

    @property
    def label(self) -> str:
        if self.inconclusive:
            return "inconclusive"
        return "Riesz" if self.is_riesz else "not Riesz"

    def to_json(self) -> dict:
        return {"mode": self.mode, "verdict": self.label, "is_riesz": self.is_riesz,
                "inconclusive": self.inconclusive, "band": self.band,
                "spread": self.spread if math.isfinite(self.spread) else "inf",
                "witness": self.blowup_witness, "notes": self.notes,
                "ratio_series": [[n, r if math.isfinite(r) else "inf"]
                                 for n, r in self.ratio_series],
                "norm_products": [[n, p] for n, p in self.norm_products]}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "ratio"])
            for n, r in self.ratio_series:
                w.writerow([n, repr(r)])


def _escape_witness(series: list[tuple[int, float]], band: float, min_witness: int):
    """Longest strictly monotone run (in increasing ``|n|``) spanning more than ``band``.

    Such a run leaves every band ``[r, r*band]`` containing its first value.
    """
    if len(series) < min_witness:
        return None
    vals = [r for _, r in series]
    best: list[int] = []
    for direction in (1, -1):
        run = [0]
        for i in range(1, len(vals)):
            if direction * (vals[i] - vals[i - 1]) > 0:
                run.append(i)
            else:
                run = [i]
            lo, hi = sorted((vals[run[0]], vals[run[-1]]))
            wide = hi == math.inf or lo == 0 or hi / lo > band
            if len(run) >= min_witness and wide and len(run) > len(best):
                best = list(run)
    return [series[i][0] for i in best] if best else None


def band_verdict(series: Iterable[tuple[int, float]], band: float, mode: str,
                 n_band: int = 0, min_witness: int = 3, finite_T: bool = False) -> BasisVerdict:
    """Ratio stays within ``[min, min*band]`` on the tail ``|n| >= n_band``."""
    ser = sorted(((n, float(r)) for n, r in series if abs(n) >= n_band),
                 key=lambda p: (abs(p[0]), p[0]))
    if not ser:
        if finite_T:
            return BasisVerdict(mode, True, False, [], None, band, 1.0,
                                "no split indices in the tail: finite T gives a Riesz basis")
        return BasisVerdict(mode, None, True, [], None, band, math.nan, "empty ratio series")
    vals = np.array([r for _, r in ser])
    lo, hi = float(np.min(vals)), float(np.max(vals))
    spread = hi / lo if lo > 0 else math.inf
    if len(ser) < 2:
        return BasisVerdict(mode, None, True, ser, None, band, spread, "too few split indices")
    if spread < band:
        return BasisVerdict(mode, True, False, ser, None, band, spread)
    witness = _escape_witness(ser, band, min_witness)
    if witness:
        return BasisVerdict(mode, False, False, ser, witness, band, spread,
                            "ratio escapes the band monotonically")
    return BasisVerdict(mode, None, True, ser, None, band, spread,
                        "band exceeded without a monotone escape")


def lemma1_criterion(records: Sequence[EigenfunctionRecord], band: float = 10.0,
                     n_band: int = 0, min_witness: int = 3,
                     finite_T: bool = False) -> BasisVerdict:
    """Band test on ``|alpha_{n,1} / beta_{n,1}|`` over split indices."""
    series = [(r.n, r.ratio) for r in records if r.j == 1]
    return band_verdict(series, band, "lemma1", n_band, min_witness, finite_T)


def lemma2_ratio(E_end: np.ndarray, floor: float = 1e-300) -> float:
    e12, e21 = abs(E_end[0, 1]), abs(E_end[1, 0])
    return math.inf if e21 <= floor else e12 / e21


def lemma2_criterion(spectrum: Spectrum | None, E_end: dict[int, np.ndarray],
                     band: float = 100.0, n_band: int = 0, min_witness: int = 3,
                     tol_cluster: float = 1e-8) -> BasisVerdict:
    """Band test on ``|e12(pi, lam_n1)| / |e21(pi, lam_n1)|`` for ``n`` in ``T``.

    ``E_end`` maps ``n`` to ``E(pi, lambda_{n,1})``; when ``spectrum`` is given
    the series is restricted to its split indices.
    """
    if spectrum is not None:
        if not spectrum.classification.periodic_type:
            raise BoundaryError("the endpoint ratio test needs periodic-type conditions",
                                "precondition")
        T = set(split_indices(spectrum, tol_cluster))
        keys = [n for n in E_end if n in T]
    else:
        keys = list(E_end)
    series = [(n, lemma2_ratio(E_end[n])) for n in keys]
    finite = spectrum is not None and not [n for n in keys if abs(n) >= n_band]
    return band_verdict(series, band, "lemma2", n_band, min_witness, finite)


def branch_one_endpoints(potential: Potential, spectrum: Spectrum,
                         config: SolverConfig | None = None) -> dict[int, np.ndarray]:
    """``E(pi, lambda_{n,1})`` for every index in the spectrum."""
    ent = spectrum.branch(1)
    if not ent:
        return {}
    batch = endpoint_matrix(potential, [e.lam for e in ent], config=config)
    return {e.n: batch.E[i] for i, e in enumerate(ent)}


def periodic_type_verdicts(potential: Potential, spectrum: Spectrum, a: complex,
                           band2: float = 100.0, n_band: int | None = None,
                           tol_cluster: float = 1e-8,
                           config: SolverConfig | None = None) -> tuple[BasisVerdict, BasisVerdict]:
    """Both ratio tests on one spectrum; they must agree."""
    n_band = spectrum.n0 + 1 if n_band is None else n_band
    ends = branch_one_endpoints(potential, spectrum, config)
    T = set(split_indices(spectrum, tol_cluster))
    v2 = lemma2_criterion(spectrum, ends, band2, n_band, tol_cluster=tol_cluster)
    recs = [eigenfunction_periodic_type(spectrum.pair(n)[0], ends[n], a, n, 1)
            for n in sorted(T) if n in ends]
    finite = not [n for n in T if abs(n) >= n_band]
    v1 = lemma1_criterion(recs, math.sqrt(band2), n_band, finite_T=finite)
    return v1, v2


# -- non-periodic-type --------------------------------------------------------------

def _growing(products: list[tuple[int, float]], min_witness: int, factor: float):
    # one value per |n|: the two tails are interleaved otherwise
    by_abs: dict[int, float] = {}
    for n, p in products:
        by_abs[abs(n)] = max(p, by_abs.get(abs(n), -math.inf))
    ser = sorted(by_abs.items())
    best: list[int] = []
    run = [0] if ser else []
    for i in range(1, len(ser)):
        if ser[i][1] > ser[i - 1][1]:
            run.append(i)
        else:
            run = [i]
        if len(run) >= min_witness and len(run) > len(best):
            best = list(run)
    if best and ser[best[-1]][1] >= factor * ser[best[0]][1]:
        return [ser[i][0] for i in best]
    return None


def theorem1_verdict(spectrum: Spectrum, bc_class: BcClassification, potential: Potential,
                     minors: Minors, tol_cluster: float = 1e-8, m: int = 129,
                     n_band: int | None = None, min_witness: int = 3,
                     growth_factor: float = 1.2,
                     config: SolverConfig | None = None) -> BasisVerdict:
    """Asymptotic multiplicity, corroborated by residue norm products."""
    if bc_class.periodic_type:
        raise BoundaryError("periodic-type conditions: use the ratio tests instead",
                            "precondition")
    if bc_class.strongly_regular or not bc_class.regular:
        raise BoundaryError("the multiplicity criterion needs regular, not strongly regular "
                            "conditions", "precondition")
    n_band = spectrum.n0 if n_band is None else n_band
    mult = asymptotic_multiplicity_test(spectrum, tol_cluster, n_band)
    products: list[tuple[int, float]] = []
    for n in mult.T_set:
        if abs(n) <= n_band:
            continue
        e = min((x for x in spectrum.entries if x.n == n), key=lambda x: x.j)
        fm = dense_solution(potential, e.lam, m, config)
        try:
            rp = residue_pair(e.lam, fm, minors, e.delta_prime, tol_rank=1e-4)
            products.append((n, rp.norm_product))
        except FactorizationError:
            products.append((n, math.inf))
    witness = _growing(products, min_witness, growth_factor) if products else None
    if mult.asymptotically_multiple:
        note = "asymptotically multiple spectrum"
        return BasisVerdict("theorem1", True, False, [], None, 0.0, 1.0, note, products)
    if witness:
        return BasisVerdict("theorem1", False, False, [], witness, 0.0, math.inf,
                            "split tail with growing norm products", products)
    return BasisVerdict("theorem1", False, False, [], None, 0.0, math.inf,
                        "split tail; norm products do not grow monotonically", products)


def signals_consistent(verdict: BasisVerdict) -> bool:
    """Multiplicity and norm-product growth point the same way."""
    if verdict.is_riesz:
        finite = [p for _, p in verdict.norm_products if math.isfinite(p)]
        return len(finite) == len(verdict.norm_products)
    return verdict.blowup_witness is not None


# -- expansions -------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionReport:
    indices: list[tuple[int, int]]
    terms: np.ndarray
    plain_norms: np.ndarray
    grouped_norms: np.ndarray
    f_norm: float


def expansion_conditioning(f: np.ndarray | Callable, records: Sequence[EigenfunctionRecord],
                           N: int | None = None) -> ExpansionReport:
    """Terms ``|<f, z_n>| ||y_n||`` and partial sums of ``sum <f, z_n> y_n``.

    Partial sums are reported both term by term and grouped by index ``n``.
    """
    recs = [r for r in records if N is None or abs(r.n) <= N]
    recs.sort(key=lambda r: (abs(r.n), r.n, r.j))
    x = recs[0].x
    fv = f(x) if callable(f) else np.asarray(f)
    terms, plain, grouped = [], [], []
    acc = np.zeros_like(recs[0].y)
    for i, r in enumerate(recs):
        z = r.z if r.z is not None else r.gamma * np.conj(r.y[:, ::-1])
        c = inner(fv, z, x)
        terms.append(abs(c) * r.y_norm)
        acc = acc + c * r.y
        plain.append(norm(acc, x))
        last = i == len(recs) - 1 or recs[i + 1].n != r.n
        if last:
            grouped.append(norm(acc, x))
    return ExpansionReport([(r.n, r.j) for r in recs], np.array(terms), np.array(plain),
                           np.array(grouped), norm(fv, x))


def periodic_type_records(potential: Potential, spectrum: Spectrum, a: complex,
                          m: int = 257, tol_cluster: float = 1e-8,
                          config: SolverConfig | None = None) -> list[EigenfunctionRecord]:
    """Eigenfunctions with biorthogonal partners for every located eigenvalue."""
    from dirac_spectra.core import periodic_type_matrix
    bm = periodic_type_matrix(a)
    T = set(split_indices(spectrum, tol_cluster))
    out: list[EigenfunctionRecord] = []
    for n in sorted({e.n for e in spectrum.entries}):
        ents = sorted((e for e in spectrum.entries if e.n == n), key=lambda e: e.j)
        if n in T:
            for e in ents:
                fm = dense_solution(potential, e.lam, m, config)
                rec = eigenfunction_periodic_type(e.lam, fm, a, n, e.j)
                if rec.D is not None and abs(rec.D) == 0.0:
                    raise DegenerateEigenvectorError(f"D(lambda) vanishes at split index {n}")
                out.append(with_partner(rec))
        else:
            fm = dense_solution(potential, ents[0].lam, m, config)
            recs = eigenspace(ents[0].lam, fm, bm, n)
            if len(recs) == 1:
                rec = recs[0]
                out.extend(dual_partners([rec]))
            else:
                out.extend(dual_partners(recs))
    return out


def diagnostics_report(verdicts: Sequence[BasisVerdict],
                       records: Sequence[EigenfunctionRecord] = (),
                       E_end: dict[int, np.ndarray] | None = None) -> dict:
    """JSON-ready report: per-index quantities plus one block per verdict."""
    rows: dict[int, dict] = {}
    for r in records:
        if r.j != 1:
            continue
        row = rows.setdefault(r.n, {"n": r.n})
        row["ratio_lemma1"] = r.ratio if math.isfinite(r.ratio) else "inf"
        if r.y is not None and (r.z is not None or r.gamma is not None):
            row["norm_product"] = r.norm_product
        if r.gamma is not None:
            row["gamma"] = [r.gamma.real, r.gamma.imag]
    for n, E in (E_end or {}).items():
        q = lemma2_ratio(E)
        rows.setdefault(n, {"n": n})["ratio_lemma2"] = q if math.isfinite(q) else "inf"
    for v in verdicts:
        for n, p in v.norm_products:
            rows.setdefault(n, {"n": n})["norm_product"] = p
    return {"per_index": [rows[n] for n in sorted(rows)],
            "verdicts": [v.to_json() for v in verdicts]}
