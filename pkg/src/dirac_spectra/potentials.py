"""Potential components ``P``, ``Q`` on [0, pi] and the ``Potential`` pair.

Every component can be evaluated, differentiated, and integrated against the
step partition of the fundamental-matrix integrator (``step_moments``).
Exponential polynomials integrate exactly, so rapidly oscillating terms (the
lacunary corrections) need no resolution by the step grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from dirac_spectra.core import complex_from_json, complex_to_json

PI = math.pi

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)
_PANEL_NODES, _PANEL_WEIGHTS = np.polynomial.legendre.leggauss(12)


def _series_terms(bound: float) -> int:
    """Terms of the exponential series needed for ``bound^n / n! < 1e-18``."""
    term, n = 1.0, 0
    while term > 1e-18 and n < 80:
        n += 1
        term *= bound / n
    return n + 1


def _unit_moments(theta: np.ndarray, kmax: int) -> np.ndarray:
    """``I_k(theta) = int_{-1}^{1} u^k exp(i theta u) du`` for ``k = 0..kmax``.

    Power series for small ``|theta|``, forward recurrence otherwise (stable
    once ``|theta| > kmax``).
    """
    theta = np.asarray(theta, dtype=complex)
    out = np.empty((kmax + 1,) + theta.shape, dtype=complex)
    small = np.abs(theta) <= 4.0
    if np.any(small):
        ts = theta[small]
        it = 1j * ts
        n_terms = _series_terms(float(np.max(np.abs(ts))))
        for k in range(kmax + 1):
            acc = np.zeros_like(ts)
            term = np.ones_like(ts)
            for n in range(n_terms):
                if (k + n) % 2 == 0:
                    acc = acc + term * (2.0 / (k + n + 1))
                term = term * it / (n + 1)
            out[k][small] = acc
    big = ~small
    if np.any(big):
        tb = theta[big]
        ep = np.exp(1j * tb)
        em = np.exp(-1j * tb)
        prev = 2.0 * np.sin(tb) / tb
        out[0][big] = prev
        for k in range(1, kmax + 1):
            prev = (ep - (-1) ** k * em) / (1j * tb) - k / (1j * tb) * prev
            out[k][big] = prev
    return out


class Component:
    """Interface shared by potential components."""

    #: longest integrator step for which ``step_moments`` stays accurate
    max_step: float = math.inf
    smooth: bool = True

    def __call__(self, x):
        raise NotImplementedError

    def derivative_at(self, x):
        raise NotImplementedError

    def step_moments(self, x0: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(int f, int (t - mid) f)`` over each step ``[x0, x0 + h]``."""
        x0 = np.asarray(x0, dtype=float)
        h = np.asarray(h, dtype=float)
        half = 0.5 * h
        mid = x0 + half
        t = mid[..., None] + half[..., None] * _GL_NODES
        f = self(t)
        m0 = half * np.sum(_GL_WEIGHTS * f, axis=-1)
        m1 = half * half * np.sum(_GL_WEIGHTS * _GL_NODES * f, axis=-1)
        return m0, m1

    def integral(self, a: float = 0.0, b: float = PI) -> complex:
        return self.oscillatory_integral(0.0, a, b)

    def oscillatory_integral(self, omega: complex, a: float = 0.0, b: float = PI) -> complex:
        """``int_a^b f(t) exp(i omega t) dt`` by Gauss-Legendre panels.

        Panels are at most half a period of the weight long.
        """
        if b <= a:
            return 0j
        width = b - a
        n_panels = max(8, int(math.ceil(width * abs(omega) / PI)) + 1)
        edges = np.linspace(a, b, n_panels + 1)
        half = 0.5 * np.diff(edges)
        mid = edges[:-1] + half
        t = mid[:, None] + half[:, None] * _PANEL_NODES
        vals = self(t) * np.exp(1j * omega * t)
        return complex(np.sum(half[:, None] * _PANEL_WEIGHTS * vals))

    def scaled(self, factor: complex) -> "Component":
        return _ScaledComponent(self, complex(factor))

    def to_json(self) -> dict:
        raise TypeError(f"{type(self).__name__} has no JSON form")


class _ScaledComponent(Component):
    def __init__(self, base: Component, factor: complex):
        self.base = base
        self.factor = factor
        self.max_step = base.max_step
        self.smooth = base.smooth

    def __call__(self, x):
        return self.factor * self.base(x)

    def derivative_at(self, x):
        return self.factor * self.base.derivative_at(x)

    def step_moments(self, x0, h):
        m0, m1 = self.base.step_moments(x0, h)
        return self.factor * m0, self.factor * m1

    def oscillatory_integral(self, omega, a=0.0, b=PI):
        return self.factor * self.base.oscillatory_integral(omega, a, b)


class ExpPoly(Component):
    """Exponential polynomial ``sum_k c_k x**p_k exp(i w_k x)``.

    Covers constants, trigonometric polynomials, Fourier series over
    ``exp(2imx)``, the lacunary series and its antiderivative, and linear
    corrections.  All integrals are evaluated in closed form.
    """

    def __init__(self, coef: Sequence[complex] = (), omega: Sequence[complex] = (),
                 power: Sequence[int] | None = None):
        coef = np.atleast_1d(np.asarray(coef, dtype=complex))
        omega = np.atleast_1d(np.asarray(omega, dtype=complex))
        if power is None:
            power = np.zeros(coef.shape, dtype=int)
        power = np.atleast_1d(np.asarray(power, dtype=int))
        if not (coef.shape == omega.shape == power.shape):
            raise ValueError("coef, omega and power must have equal length")
        if np.any(power < 0) or np.any(power > 3):
            raise ValueError("powers must lie in 0..3")
        self.coef, self.omega, self.power = coef, omega, power

    @classmethod
    def zero(cls) -> "ExpPoly":
        return cls()

    @classmethod
    def constant(cls, c: complex) -> "ExpPoly":
        return cls([c], [0.0])

    @classmethod
    def fourier(cls, modes: Mapping[int, complex]) -> "ExpPoly":
        """``sum_m c_m exp(2imx)`` from a mapping ``m -> c_m``."""
        ms = sorted(modes)
        return cls([modes[m] for m in ms], [2.0 * m for m in ms])

    def __len__(self) -> int:
        return int(self.coef.size)

    @property
    def max_frequency(self) -> float:
        return float(np.max(np.abs(self.omega))) if len(self) else 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not len(self):
            return np.zeros(x.shape, dtype=complex)
        xe = x[..., None]
        return np.sum(self.coef * xe ** self.power * np.exp(1j * self.omega * xe), axis=-1)

    def derivative(self) -> "ExpPoly":
        c = [self.coef * 1j * self.omega]
        w = [self.omega]
        p = [self.power]
        has = self.power > 0
        c.append(self.coef[has] * self.power[has])
        w.append(self.omega[has])
        p.append(self.power[has] - 1)
        return ExpPoly(np.concatenate(c), np.concatenate(w), np.concatenate(p)).simplify()

    def derivative_at(self, x):
        return self.derivative()(x)

    def simplify(self, tol: float = 0.0) -> "ExpPoly":
        """Merge terms with identical frequency and power; drop zero terms."""
        merged: dict[tuple[complex, int], complex] = {}
        for c, w, p in zip(self.coef, self.omega, self.power):
            key = (complex(w), int(p))
            merged[key] = merged.get(key, 0j) + complex(c)
        items = [(k, v) for k, v in merged.items() if abs(v) > tol]
        if not items:
            return ExpPoly()
        return ExpPoly([v for _, v in items], [k[0] for k, _ in items],
                       [k[1] for k, _ in items])

    def __add__(self, other: "ExpPoly") -> "ExpPoly":
        if not isinstance(other, ExpPoly):
            return NotImplemented
        return ExpPoly(np.concatenate([self.coef, other.coef]),
                       np.concatenate([self.omega, other.omega]),
                       np.concatenate([self.power, other.power]))

    def __neg__(self) -> "ExpPoly":
        return ExpPoly(-self.coef, self.omega, self.power)

    def __sub__(self, other: "ExpPoly") -> "ExpPoly":
        return self + (-other)

    def scaled(self, factor: complex) -> "ExpPoly":
        return ExpPoly(complex(factor) * self.coef, self.omega, self.power)

    def modulated(self, omega: complex) -> "ExpPoly":
        """Product with ``exp(i omega x)``."""
        return ExpPoly(self.coef, self.omega + omega, self.power)

    def _moments(self, x0, h, first: bool):
        x0 = np.asarray(x0, dtype=float)
        h = np.asarray(h, dtype=float)
        shape = np.broadcast(x0, h).shape
        if not len(self):
            z = np.zeros(shape, dtype=complex)
            return z, z
        half = (0.5 * h)[..., None]
        mid = (x0 + 0.5 * h)[..., None]
        theta = self.omega * half
        kmax = int(self.power.max()) + 1
        ik = _unit_moments(theta, kmax)
        phase = self.coef * np.exp(1j * self.omega * mid)
        m0 = np.zeros(np.broadcast(mid, theta).shape, dtype=complex)
        m1 = np.zeros_like(m0)
        for q in range(kmax):
            # (mid + s)^p = sum_q binom(p, q) mid^(p-q) s^q
            binom = np.array([math.comb(int(p), q) if q <= p else 0 for p in self.power])
            if not binom.any():
                continue
            w = binom * mid ** np.maximum(self.power - q, 0)
            m0 = m0 + w * half ** (q + 1) * ik[q]
            if first:
                m1 = m1 + w * half ** (q + 2) * ik[q + 1]
        return np.sum(phase * m0, axis=-1), np.sum(phase * m1, axis=-1)

    def step_moments(self, x0, h):
        return self._moments(x0, h, first=True)

    def integral(self, a: float = 0.0, b: float = PI) -> complex:
        m0, _ = self._moments(np.asarray(a, dtype=float), np.asarray(b - a, dtype=float),
                              first=False)
        return complex(m0)

    def oscillatory_integral(self, omega: complex, a: float = 0.0, b: float = PI) -> complex:
        return self.modulated(omega).integral(a, b)

    def antiderivative_at(self, x) -> np.ndarray:
        """``int_0^x f(t) dt`` evaluated pointwise."""
        x = np.asarray(x, dtype=float)
        m0, _ = self._moments(np.zeros_like(x), x, first=False)
        return m0

    def to_json(self) -> dict:
        return {"terms": [{"c": complex_to_json(c), "omega": complex_to_json(w), "power": int(p)}
                          for c, w, p in zip(self.coef, self.omega, self.power)]}

    @classmethod
    def from_json(cls, data: Any) -> "ExpPoly":
        if isinstance(data, Mapping) and "terms" in data:
            terms = data["terms"]
            return cls([complex_from_json(t["c"]) for t in terms],
                       [complex_from_json(t.get("omega", 0.0)) for t in terms],
                       [int(t.get("power", 0)) for t in terms])
        # plain Fourier modes: [[m, [re, im]], ...] meaning sum c_m exp(2imx)
        modes = {int(m): complex_from_json(c) for m, c in data}
        return cls.fourier(modes)

    def __repr__(self) -> str:
        return f"ExpPoly({len(self)} terms, max |omega| = {self.max_frequency:.4g})"


class SampledFunction(Component):
    """Interpolated samples on an increasing grid covering [0, pi]."""

    smooth = False

    def __init__(self, x: Sequence[float], values: Sequence[complex], order: str = "cubic"):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=complex)
        if x.ndim != 1 or x.shape != values.shape or x.size < 4:
            raise ValueError("need matching 1D grid and values with at least 4 points")
        if np.any(np.diff(x) <= 0):
            raise ValueError("sample grid must be strictly increasing")
        if x[0] > 1e-12 or x[-1] < PI - 1e-12:
            raise ValueError("sample grid must cover [0, pi]")
        if order not in ("linear", "cubic"):
            raise ValueError("order must be 'linear' or 'cubic'")
        self.x, self.values, self.order = x, values, order
        self.max_step = float(np.min(np.diff(x)))
        if order == "cubic":
            self._spline = CubicSpline(x, values)
            self._dspline = self._spline.derivative()
            self.smooth = True

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.order == "cubic":
            return self._spline(t)
        return np.interp(t, self.x, self.values.real) + 1j * np.interp(t, self.x, self.values.imag)

    def derivative_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.order == "cubic":
            return self._dspline(t)
        slopes = np.diff(self.values) / np.diff(self.x)
        idx = np.clip(np.searchsorted(self.x, t, side="right") - 1, 0, slopes.size - 1)
        return slopes[idx]

    def to_json(self) -> dict:
        return {"x": self.x.tolist(), "values": [complex_to_json(v) for v in self.values],
                "order": self.order}

    @classmethod
    def from_json(cls, data: Mapping) -> "SampledFunction":
        values = [complex_from_json(v) for v in data["values"]]
        x = data.get("x")
        if x is None:
            x = np.linspace(0.0, PI, len(values))
        return cls(x, values, data.get("order", "cubic"))


class SmoothFunction(Component):
    """A Python callable with an optional analytic derivative."""

    def __init__(self, f: Callable, df: Callable | None = None, name: str = "function",
                 max_step: float = PI / 256):
        self.f, self.df, self.name = f, df, name
        self.max_step = max_step

    def __call__(self, x):
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=complex)

    def derivative_at(self, x):
        x = np.asarray(x, dtype=float)
        if self.df is not None:
            return np.asarray(self.df(x), dtype=complex)
        step = 1e-5
        lo = np.clip(x - step, 0.0, PI)
        hi = np.clip(x + step, 0.0, PI)
        return (self(hi) - self(lo)) / (hi - lo)


def component_from_json(data: Any, kind: str) -> Component:
    if kind == "fourier":
        return ExpPoly.from_json(data)
    if kind == "samples":
        return SampledFunction.from_json(data)
    raise ValueError(f"unknown component kind {kind!r}")


def component_to_json(comp: Component) -> tuple[str, dict]:
    if isinstance(comp, ExpPoly):
        return "fourier", comp.to_json()
    if isinstance(comp, SampledFunction):
        return "samples", comp.to_json()
    raise TypeError(f"{type(comp).__name__} cannot be serialised")


@dataclass(frozen=True)
class Potential:
    """Off-diagonal potential ``V = [[0, P], [Q, 0]]`` on [0, pi]."""

    P: Component
    Q: Component
    kind: str = "fourier"
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def V(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (2, 2), dtype=complex)
        out[..., 0, 1] = self.P(x)
        out[..., 1, 0] = self.Q(x)
        return out

    @property
    def max_step(self) -> float:
        return min(self.P.max_step, self.Q.max_step)

    @property
    def is_zero(self) -> bool:
        return all(isinstance(c, ExpPoly) and len(c.simplify()) == 0 for c in (self.P, self.Q))

    def scaled(self, t: complex) -> "Potential":
        return Potential(self.P.scaled(t), self.Q.scaled(t), self.kind,
                         f"{t}*{self.name}" if self.name else "", dict(self.meta))

    def l1_norm(self, n: int = 4097) -> float:
        x = np.linspace(0.0, PI, n)
        from scipy.integrate import simpson
        return float(simpson(np.abs(self.P(x)), x=x) + simpson(np.abs(self.Q(x)), x=x))

    def to_json(self) -> dict:
        if self.kind == "builtin":
            return {"kind": "builtin", "name": self.name, "params": self.meta.get("params", {})}
        kp, dp = component_to_json(self.P)
        kq, dq = component_to_json(self.Q)
        if kp != kq:
            raise TypeError("P and Q must share a representation to serialise")
        return {"kind": kp, "P": dp, "Q": dq}

    @classmethod
    def from_json(cls, data: Mapping) -> "Potential":
        kind = data.get("kind")
        if kind == "builtin":
            return builtin_potential(data["name"], **dict(data.get("params", {})))
        if kind in ("fourier", "samples"):
            return cls(component_from_json(data["P"], kind),
                       component_from_json(data["Q"], kind), kind)
        raise ValueError(f"unknown potential kind {kind!r}")


def _sin(nu: float, amp: complex) -> ExpPoly:
    # amp * sin(nu x)
    return ExpPoly([amp / 2j, -amp / 2j], [nu, -nu])


def _one_minus_cos(nu: float, amp: complex) -> ExpPoly:
    # amp * (1 - cos(nu x))
    return ExpPoly([amp, -amp / 2, -amp / 2], [0.0, nu, -nu])


def endpoint_smooth_pair(p_amp: complex = 0.5, q_amp: complex = 0.25,
                         q_twist: complex = 0.1j) -> tuple[ExpPoly, ExpPoly]:
    """Smooth pair vanishing at 0 and nonzero at pi.

    ``P = p_amp sin(x/2)``, ``Q = q_amp (1 - cos x) + q_twist sin x``.
    """
    P = _sin(0.5, p_amp)
    Q = _one_minus_cos(1.0, q_amp) + _sin(1.0, q_twist)
    return P.simplify(), Q.simplify()


def builtin_potential(name: str, **params) -> Potential:
    """Named potentials: ``zero``, ``constant``, ``endpoint-smooth``, ``theorem2``."""
    if name == "zero":
        return Potential(ExpPoly.zero(), ExpPoly.zero(), "builtin", "zero", {"params": params})
    if name == "constant":
        c = complex_from_json(params.get("c", 0.0)) if "c" in params else 0j
        cp = complex_from_json(params["P"]) if "P" in params else c
        cq = complex_from_json(params["Q"]) if "Q" in params else c
        return Potential(ExpPoly.constant(cp), ExpPoly.constant(cq), "builtin", "constant",
                         {"params": params})
    if name == "endpoint-smooth":
        kw = {k: complex_from_json(v) for k, v in params.items()}
        P, Q = endpoint_smooth_pair(**kw)
        return Potential(P, Q, "builtin", "endpoint-smooth", {"params": params})
    if name == "theorem2":
        from dirac_spectra.counterexample import theorem2_potential
        return theorem2_potential(**params)
    raise ValueError(f"unknown builtin potential {name!r}")
