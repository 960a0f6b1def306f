"""Potentials on either side of the Riesz-basis property for periodic-type problems.

Positive side: smooth components vanishing at 0 and nonzero at pi.  Negative
side: a smooth trigonometric polynomial plus the antiderivative of a lacunary
series whose frequencies resonate with single eigenvalue indices ``a_k``,
corrected by a linear function so the result vanishes at both ends.

The lacunary series is placed in the ``Q`` slot by default, where it drives
``e21(pi)``; ``slot="P"`` places it in the first component instead.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from dirac_spectra.asymptotics import MarchenkoData, e12_asym, e21_asym, fit_order
from dirac_spectra.core import periodic_type_matrix, tau0
from dirac_spectra.diagnostics import BasisVerdict, band_verdict, lemma2_ratio
from dirac_spectra.potentials import ExpPoly, Potential, SmoothFunction, endpoint_smooth_pair
from dirac_spectra.solver import SolverConfig, endpoint_matrix
from dirac_spectra.spectrum import LocateConfig, locate_eigenvalues

PI = math.pi
_GRID = np.linspace(0.0, PI, 40001)


class ConstructionError(ValueError):
    """A certified inequality of the construction failed."""


class PlanOverflowError(ValueError):
    pass


def l1_distance(f: Callable, g: Callable, x: np.ndarray = _GRID) -> float:
    return float(simpson(np.abs(np.asarray(f(x)) - np.asarray(g(x))), x=x))


# -- positive side ----------------------------------------------------------------

def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3 - 2 * t)


def _smoothstep_d(t):
    inside = (t > 0) & (t < 1)
    return np.where(inside, 6 * t * (1 - t), 0.0)


def smooth_endpoint_potential(f: Callable, eps: float, df: Callable | None = None,
                              delta0: float = 0.5, end_value: complex | None = None
                              ) -> SmoothFunction:
    """C^1 function with ``g(0) = 0``, ``g(pi) != 0`` and ``||f - g||_1 < eps/2``.

    ``f`` is ramped to zero over ``[0, delta]`` and blended into a constant
    over ``[pi - delta, pi]``; ``delta`` halves until the L1 bound holds.  The
    constant is ``f(pi)`` when that is nonzero and ``eps/8`` otherwise.
    """
    fpi = complex(np.asarray(f(np.array([PI])))[0])
    c = end_value if end_value is not None else (fpi if abs(fpi) > 1e-12 else eps / 8)
    if df is None:
        def df(x, h=1e-6):
            lo, hi = np.clip(x - h, 0, PI), np.clip(x + h, 0, PI)
            return (np.asarray(f(hi)) - np.asarray(f(lo))) / (hi - lo)
    delta = delta0
    while True:
        d = delta

        def g(x, d=d):
            x = np.asarray(x, dtype=float)
            left = _smoothstep(x / d)
            right = _smoothstep((PI - x) / d)
            return left * (right * np.asarray(f(x)) + (1 - right) * c)

        def dg(x, d=d):
            x = np.asarray(x, dtype=float)
            left, dl = _smoothstep(x / d), _smoothstep_d(x / d) / d
            right, dr = _smoothstep((PI - x) / d), -_smoothstep_d((PI - x) / d) / d
            inner = right * np.asarray(f(x)) + (1 - right) * c
            d_inner = dr * np.asarray(f(x)) + right * np.asarray(df(x)) - dr * c
            return dl * inner + left * d_inner

        err = l1_distance(f, g)
        if err < eps / 2 or delta < 1e-6:
            break
        delta /= 2
    out = SmoothFunction(g, dg, name="smooth-endpoint", max_step=min(PI / 256, delta / 8))
    out.delta, out.l1_error, out.end_value = delta, err, c
    return out


# -- truncation -------------------------------------------------------------------

def fourier_truncate(S: Callable, eps: float, n_samples: int = 4096,
                     n_cap: int = 512) -> tuple[ExpPoly, int]:
    """Shortest ``S_N = sum_{|m|<=N} c_m exp(2imx)`` with tail bound below ``eps/10``.

    Coefficients come from an FFT over one period of length pi; the uniform
    remainder is bounded by the sum of the discarded coefficient moduli.
    """
    x = np.arange(n_samples) * PI / n_samples
    c = np.fft.fft(np.asarray(S(x), dtype=complex)) / n_samples
    m = np.fft.fftfreq(n_samples, d=1.0 / n_samples).astype(int)
    mag = np.abs(c)
    mag[mag < 1e-15 * max(1.0, mag.max(initial=0.0))] = 0.0
    limit = min(n_cap, n_samples // 2 - 1)
    for N in range(0, limit + 1):
        tail = float(np.sum(mag[np.abs(m) > N]))
        if tail < eps / 10:
            modes = {int(k): complex(c[i]) for i, k in enumerate(m) if abs(k) <= N and mag[i] > 0}
            SN = ExpPoly.fourier(modes) if modes else ExpPoly.zero()
            SN.remainder_bound = tail
            return SN, N
    raise ConstructionError(f"Fourier tail still above eps/10 at N = {limit}; S is not smooth enough")


# -- lacunary plan ----------------------------------------------------------------

@dataclass(frozen=True)
class LacunaryPlan:
    N: int
    epsilon: float
    w0: complex
    C: int
    a_seq: tuple[int, ...]
    alpha_m: dict = field(default_factory=dict)
    beta_m: dict = field(default_factory=dict)
    desk_scale_flag: bool = False
    sign: int = 1
    gap_constants: tuple[float, ...] = ()

    @property
    def lacunary(self) -> tuple[int, ...]:
        """Indices carried by the series (``k >= 1``)."""
        return self.a_seq[1:]

    @property
    def theta_bound(self) -> float:
        """Uniform bound on ``|theta|`` on [0, pi]."""
        growth = max(1.0, math.exp(-2 * self.sign * self.w0.imag * PI))
        return growth * sum(1 / math.sqrt(a) for a in self.lacunary)

    def frequencies(self) -> np.ndarray:
        return np.array([self.sign * (2 * self.w0 + 4 * a) for a in self.lacunary], dtype=complex)

    def to_json(self) -> dict:
        return {"N": self.N, "epsilon": self.epsilon, "w0": [self.w0.real, self.w0.imag],
                "C": self.C, "a_seq": list(self.a_seq), "desk_scale": self.desk_scale_flag,
                "sign": self.sign, "gap_constants": list(self.gap_constants),
                "theta_bound": self.theta_bound,
                "alpha_m": {str(k): [v.real, v.imag] for k, v in self.alpha_m.items()},
                "beta_m": {str(k): [v.real, v.imag] for k, v in self.beta_m.items()}}


def full_gap_ratio(N: int, eps: float, w0: complex) -> int:
    return int(math.floor(math.exp(2 * abs(w0) * PI) + 100)) * N * N * int(math.floor(1 / eps ** 2 + 1))


def lacunary_plan(N: int, eps: float, w0: complex, K: int, C_override: int | None = None,
                  sign: int = 1, S_N: ExpPoly | None = None) -> LacunaryPlan:
    """Geometric sequence ``a_0 = N``, ``a_{k+1} = C a_k`` with ``K`` entries."""
    if N < 1 or not 0 < eps < 1 or K < 1:
        raise ValueError("need N >= 1, 0 < eps < 1 and K >= 1")
    C = int(C_override) if C_override is not None else full_gap_ratio(N, eps, complex(w0))
    a_seq = tuple(N * C ** k for k in range(K))
    if 4 * a_seq[-1] > 2 ** 52:
        raise PlanOverflowError(f"a_K = {a_seq[-1]} exceeds double precision; reduce K")
    lac = a_seq[1:]
    gaps = []
    for k, ak in enumerate(lac):
        s = sum(1.0 / abs(aj - ak) for j, aj in enumerate(lac) if j != k)
        gaps.append(s * ak ** (2 / 3))
    alpha, beta = {}, {}
    if S_N is not None:
        for c, w in zip(S_N.coef, S_N.omega):
            m = int(round(w.real / 2))
            (alpha if m >= 0 else beta)[abs(m)] = complex(c)
    desk = C_override is not None and C < full_gap_ratio(N, eps, complex(w0))
    return LacunaryPlan(N, eps, complex(w0), C, a_seq, alpha, beta, desk, sign, tuple(gaps))


def theta(x, plan: LacunaryPlan):
    """``exp(2 i s w0 x) sum_k exp(4 i s a_k x) / sqrt(a_k)``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=complex)
    for a in plan.lacunary:
        out += np.exp(1j * plan.sign * (2 * plan.w0 + 4 * a) * x) / math.sqrt(a)
    return out


def theta_expoly(plan: LacunaryPlan) -> ExpPoly:
    return ExpPoly([1 / math.sqrt(a) for a in plan.lacunary], plan.frequencies())


def theta_antiderivative(plan: LacunaryPlan) -> ExpPoly:
    """``int_0^x theta``: each mode contributes ``(exp(i w x) - 1) / (i w sqrt(a))``."""
    w = plan.frequencies()
    c = np.array([1 / (1j * wk * math.sqrt(a)) for wk, a in zip(w, plan.lacunary)])
    if c.size == 0:
        return ExpPoly.zero()
    return ExpPoly(np.append(c, -np.sum(c)), np.append(w, 0.0))


# -- construction -----------------------------------------------------------------

@dataclass(frozen=True)
class BuiltPotential:
    P_tilde: ExpPoly
    Q_hat: ExpPoly
    plan: LacunaryPlan
    S: Callable | None
    S_N: ExpPoly
    F: ExpPoly
    F0: ExpPoly
    closeness: float
    checks: dict
    slot: str = "Q"

    @property
    def potential(self) -> Potential:
        P, Q = (self.Q_hat, self.P_tilde) if self.slot == "Q" else (self.P_tilde, self.Q_hat)
        return Potential(P, Q, "fourier", "theorem2", {"plan": self.plan.to_json(), "slot": self.slot})

    @property
    def F0_slope(self) -> complex:
        return complex((self.F(PI) - self.F(0.0)) / PI)

    def to_json(self) -> dict:
        return {"plan": self.plan.to_json(), "slot": self.slot, "closeness": self.closeness,
                "checks": {k: {"value": v[0], "bound": v[1], "ok": v[2]} for k, v in self.checks.items()},
                "P_tilde": self.P_tilde.to_json(), "Q_hat": self.Q_hat.to_json(),
                "S_N": self.S_N.to_json()}


def build_p_tilde(S_N: ExpPoly, plan: LacunaryPlan, S: Callable | None = None,
                  f1: Callable | None = None, Q_hat: ExpPoly | None = None,
                  slot: str = "Q") -> BuiltPotential:
    """``P~ = F - F0`` with ``F = S_N + int_0^x theta`` and ``F0`` the chord of ``F``.

    Every inequality of the closeness chain is evaluated; failures raise only
    for plans at the full gap ratio.
    """
    F = (S_N + theta_antiderivative(plan)).simplify()
    F_0, F_pi = complex(F(0.0)), complex(F(PI))
    F0 = ExpPoly([(F_pi - F_0) / PI, F_0], [0.0, 0.0], [1, 0])
    P_tilde = (F - F0).simplify()
    eps = plan.epsilon
    checks = {
        "theta_uniform": (plan.theta_bound, eps / (10 * PI)),
        "F(0)": (abs(F_0), eps / 10),
        "F(pi)": (abs(F_pi), eps / 5),
        "S_N(0)": (abs(complex(S_N(0.0))), eps / 10),
        "S_N(pi)": (abs(complex(S_N(PI))), eps / 10),
    }
    if S is not None:
        checks["L1(S - P~)"] = (l1_distance(S, P_tilde), 2 * eps / 5)
    closeness = math.nan
    if f1 is not None:
        closeness = l1_distance(f1, P_tilde)
        checks["L1(f1 - P~)"] = (closeness, eps / 2)
    checks = {k: (float(v), float(b), bool(v < b)) for k, (v, b) in checks.items()}
    if not plan.desk_scale_flag:
        failed = [k for k, v in checks.items() if not v[2]]
        if failed:
            raise ConstructionError("failed inequalities: " + ", ".join(failed))
    if Q_hat is None:
        p_hat, q_hat = endpoint_smooth_pair()
        Q_hat = p_hat if slot == "Q" else q_hat
    return BuiltPotential(P_tilde, Q_hat, plan, S, S_N, F, F0, closeness, checks, slot)


# -- resonance integrals ----------------------------------------------------------

def _phase_integral(omega: complex) -> complex:
    """``int_0^pi exp(i omega t) dt``."""
    if abs(omega) < 1e-6:
        z = 1j * omega * PI
        return PI * (1 + z / 2 + z * z / 6 + z ** 3 / 24)
    return (cmath.exp(1j * omega * PI) - 1) / (1j * omega)


def integral_estimates(plan: LacunaryPlan, k: int, eps_ak1: complex,
                       tau: complex | None = None, S_N: ExpPoly | None = None,
                       F0_slope: complex = 0j) -> dict:
    """``I0 = int theta exp(-2 i s lam t) = I1 + I2`` at ``lam = tau0 + 2 a_k + eps``.

    ``k`` indexes the lacunary part (``k = 1`` is ``a_1``).  Frequencies are
    formed from integer differences so nothing is lost to cancellation.
    """
    s = plan.sign
    tau = plan.w0 if tau is None else complex(tau)
    ak = plan.a_seq[k]
    shift = 2 * (plan.w0 - tau) - 2 * eps_ak1
    I1 = 0j
    I2 = 0j
    for a in plan.lacunary:
        val = _phase_integral(s * (shift + 4 * (a - ak))) / math.sqrt(a)
        if a == ak:
            I1 = val
        else:
            I2 += val
    out = {"k": k, "a_k": ak, "eps": complex(eps_ak1), "I0": I1 + I2, "I1": I1, "I2": I2,
           "I1_scaled": abs(I1) * math.sqrt(ak), "I2_scaled": abs(I2) * ak ** (2 / 3)}
    # -2 i s lam t with lam = tau + 2 a_k + eps
    base = -2 * s * (tau + eps_ak1)
    if S_N is not None:
        d = S_N.derivative()
        val = sum(c * _phase_integral(w + base - 4 * s * ak) for c, w in zip(d.coef, d.omega))
        out["SN_prime"] = complex(val)
        out["SN_prime_scaled"] = abs(val) * ak ** (2 / 3)
    val = F0_slope * _phase_integral(base - 4 * s * ak)
    out["F0_prime"] = complex(val)
    out["F0_prime_scaled"] = abs(val) * ak
    return out


# -- large-index eigenvalues --------------------------------------------------------

def asymptotic_pair(md: MarchenkoData, a: complex, n: int, iters: int = 4
                    ) -> tuple[complex, complex]:
    """Deviations ``eps`` of the pair near ``tau0 + 2n`` from the endpoint forms.

    With ``exp(i pi tau0) = -1/a`` the characteristic equation reads
    ``1 - exp(i pi eps)(1 + b/(2 i lam)) = +-sqrt(D)``, solved by fixed point
    in ``eps`` so the large center never enters a phase.
    """
    c = tau0(a) + 2 * n
    b = md.b1(PI)
    eps = [0j, 0j]
    for _ in range(iters):
        new = []
        for i, sgn in enumerate((1, -1)):
            lam = c + eps[i]
            D = -e12_asym(md, lam) * e21_asym(md, lam)
            beta = b / (2j * lam)
            new.append(-1j / PI * cmath.log((1 - sgn * cmath.sqrt(D)) / (1 + beta)))
        eps = new
    eps.sort(key=lambda e: (e.real, e.imag))
    return eps[0], eps[1]


# -- verification -----------------------------------------------------------------

@dataclass
class DivergenceReport:
    rows: list[dict]
    slope_e21: float
    slope_e12: float
    slope_ratio: float
    verdict: BasisVerdict
    slot: str
    verdict_lemma1: BasisVerdict | None = None

    @property
    def slope_small(self) -> float:
        """Slope of the entry carrying the lacunary series."""
        return self.slope_e21 if self.slot == "Q" else self.slope_e12

    def to_json(self) -> dict:
        def clean(r):
            return {k: ([v.real, v.imag] if isinstance(v, complex) else v) for k, v in r.items()}
        return {"rows": [clean(r) for r in self.rows], "slope_e21": self.slope_e21,
                "slope_e12": self.slope_e12, "slope_ratio": self.slope_ratio,
                "verdict": self.verdict.to_json(), "slot": self.slot,
                "verdict_lemma1": self.verdict_lemma1.to_json() if self.verdict_lemma1 else None}

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "a_k", "route", "I1_sqrt_ak", "I2_ak23", "e21_ak32", "ratio"])
            for r in self.rows:
                w.writerow([r["k"], r["a_k"], r["route"], repr(r["I1_scaled"]),
                            repr(r["I2_scaled"]), repr(abs(r["e21"]) * r["a_k"] ** 1.5),
                            repr(r["ratio"])])


def _slope(a: Sequence[int], v: Sequence[float]) -> float:
    if len(a) < 3:
        return math.nan
    return -fit_order(a, v)


def verify_divergence(built: BuiltPotential, a: complex = 1.0, k_range: Sequence[int] | None = None,
                      solver_max: int = 10000, band: float = 100.0,
                      locate: LocateConfig | None = None,
                      config: SolverConfig | None = None) -> DivergenceReport:
    """Endpoint entries at ``lambda_{a_k,1}`` and their log-log slopes in ``a_k``.

    Indices up to ``solver_max`` are located and evaluated by integration;
    larger ones use the endpoint asymptotic forms.
    """
    plan = built.plan
    pot = built.potential
    minors = periodic_type_matrix(a).minors
    md = MarchenkoData(pot.P, pot.Q)
    ks = list(k_range) if k_range is not None else list(range(1, len(plan.a_seq)))
    t0 = tau0(a)
    rows = []
    for k in ks:
        ak = plan.a_seq[k]
        if ak <= solver_max:
            sp = locate_eigenvalues(pot, minors, [ak], config=locate)
            ent = [e for e in sp.entries if e.n == ak and e.j == 1]
            if not ent:
                raise ConstructionError(f"no eigenvalue located near index {ak}")
            lam = ent[0].lam
            eps = complex(lam - (t0 + 2 * ak))
            E = endpoint_matrix(pot, [lam], config=config).E[0]
            e12, e21, route = complex(E[0, 1]), complex(E[1, 0]), "solver"
            coef = abs(a + E[1, 1])
        else:
            eps, _ = asymptotic_pair(md, a, ak)
            lam = t0 + 2 * ak + eps
            e12, e21, route = complex(e12_asym(md, lam)), complex(e21_asym(md, lam)), "asymptotic"
            # |a + e22| = |a| sqrt|D| on the characteristic equation; avoids cancellation
            coef = abs(a) * math.sqrt(abs(e12 * e21))
        est = integral_estimates(plan, k, eps, t0, built.S_N, built.F0_slope)
        ratio = lemma2_ratio(np.array([[0, e12], [e21, 0]]))
        rows.append({"k": k, "a_k": ak, "route": route, "lam": complex(lam), "eps": eps,
                     "e12": e12, "e21": e21, "ratio": ratio,
                     "ratio_lemma1": coef / abs(e21) if e21 != 0 else math.inf,
                     "I1_scaled": est["I1_scaled"], "I2_scaled": est["I2_scaled"],
                     "SN_prime_scaled": est.get("SN_prime_scaled", math.nan),
                     "F0_prime_scaled": est["F0_prime_scaled"]})
    a_vals = [r["a_k"] for r in rows]
    s21 = _slope(a_vals, [abs(r["e21"]) for r in rows])
    s12 = _slope(a_vals, [abs(r["e12"]) for r in rows])
    sr = _slope(a_vals, [r["ratio"] for r in rows])
    verdict = band_verdict([(r["a_k"], r["ratio"]) for r in rows], band, "lemma2")
    verdict1 = band_verdict([(r["a_k"], r["ratio_lemma1"]) for r in rows], math.sqrt(band),
                            "lemma1")
    return DivergenceReport(rows, s21, s12, sr, verdict, built.slot, verdict1)


# -- default pipeline -------------------------------------------------------------

def default_target(x):
    """Smooth target with double zeros at both ends."""
    x = np.asarray(x, dtype=float)
    return np.sin(x) ** 2 * (0.3 + 0.1 * np.cos(2 * x) + 0.05 * np.sin(6 * x))


def build_theorem2(eps: float = 0.05, a: complex = 1.0, K: int = 5,
                   C: int | None = 40, slot: str = "Q",
                   target: Callable = default_target) -> BuiltPotential:
    """Full negative-side pipeline with ``w0 = tau0(a)``.

    ``C=None`` selects the full gap ratio.  The target must vanish together
    with its derivative at both ends, so it serves directly as ``S``.
    """
    S_N, N = fourier_truncate(target, eps)
    w0 = tau0(a)
    sign = -1 if slot == "Q" else 1
    plan = lacunary_plan(max(N, 1), eps, w0, K, C, sign, S_N)
    return build_p_tilde(S_N, plan, S=target, f1=target, slot=slot)


def theorem2_potential(eps: float = 0.05, a: complex = 1.0, K: int = 5, C: int | None = 40,
                       slot: str = "Q") -> Potential:
    """Negative-side potential as a builtin (serialised by its parameters)."""
    if isinstance(a, (list, tuple)):
        a = complex(a[0], a[1])
    built = build_theorem2(eps, complex(a), K, C, slot)
    pot = built.potential
    params = {"eps": eps, "a": [complex(a).real, complex(a).imag], "K": K, "C": C, "slot": slot}
    return Potential(pot.P, pot.Q, "builtin", "theorem2", {"params": params, **pot.meta})
