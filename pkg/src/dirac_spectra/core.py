"""Boundary conditions, their classification, and spectral bookkeeping types.

The boundary form is ``U(y) = C y(0) + D y(pi)`` with the 2x4 coefficient
matrix ``A = [C | D]``.  Everything the spectral theory needs from ``A`` is
carried by the six 2x2 column minors ``A_ij``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

_PAIRS = ((1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4))


class BoundaryError(ValueError):
    """Invalid boundary data or a boundary type the requested operation refuses.

    ``code`` is a short machine-readable reason, e.g. ``"rank-deficient"``.
    """

    def __init__(self, message: str, code: str = "invalid"):
        super().__init__(message)
        self.code = code


def complex_from_json(value: Any) -> complex:
    """Decode ``[re, im]`` (or a bare real number) into a complex."""
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ValueError(f"cannot decode complex number from {value!r}")


def complex_to_json(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


@dataclass(frozen=True)
class Minors:
    """The column minors ``A_ij = a_1i a_2j - a_1j a_2i`` of a boundary matrix."""

    A12: complex
    A13: complex
    A14: complex
    A23: complex
    A24: complex
    A34: complex

    @property
    def A32(self) -> complex:
        return -self.A23

    @property
    def A42(self) -> complex:
        return -self.A24

    def get(self, i: int, j: int) -> complex:
        """Minor for any ordered column pair; antisymmetric in ``(i, j)``."""
        if i == j:
            return 0j
        if i > j:
            return -self.get(j, i)
        return getattr(self, f"A{i}{j}")

    def as_dict(self) -> dict[str, complex]:
        return {f"A{i}{j}": getattr(self, f"A{i}{j}") for i, j in _PAIRS}

    def scale(self) -> float:
        return max(abs(v) for v in self.as_dict().values())


@dataclass(frozen=True)
class BoundaryMatrix:
    """The 2x4 complex coefficient matrix of ``U(y) = C y(0) + D y(pi)``."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.entries, dtype=complex)
        if arr.shape != (2, 4):
            raise BoundaryError(f"boundary matrix must be 2x4, got {arr.shape}", "shape")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)
        minors = boundary_minors(arr)
        object.__setattr__(self, "_minors", minors)

    @property
    def minors(self) -> Minors:
        return self._minors  # type: ignore[attr-defined]

    @property
    def C(self) -> np.ndarray:
        return self.entries[:, :2]

    @property
    def D(self) -> np.ndarray:
        return self.entries[:, 2:]

    def residual(self, y0: np.ndarray, ypi: np.ndarray) -> np.ndarray:
        """Value of the boundary form ``C y(0) + D y(pi)``."""
        return self.C @ np.asarray(y0) + self.D @ np.asarray(ypi)

    def to_json(self) -> list[list[list[float]]]:
        return [[complex_to_json(v) for v in row] for row in self.entries]

    @classmethod
    def from_json(cls, data: Any) -> "BoundaryMatrix":
        if isinstance(data, Mapping):
            if "periodic_type_a" in data:
                return periodic_type_matrix(complex_from_json(data["periodic_type_a"]))
            if "matrix" in data:
                data = data["matrix"]
            else:
                raise BoundaryError("unrecognised boundary descriptor keys: "
                                    f"{sorted(data)}", "parse")
        try:
            rows = [[complex_from_json(v) for v in row] for row in data]
        except (TypeError, ValueError) as exc:
            raise BoundaryError(f"cannot parse boundary matrix: {exc}", "parse") from exc
        return cls(np.array(rows, dtype=complex))


def periodic_type_matrix(a: complex) -> BoundaryMatrix:
    """Normal form ``[[1, 0, a, 0], [0, a, 0, 1]]`` of periodic-type conditions.

    ``a = -1`` gives periodic and ``a = 1`` antiperiodic conditions.
    """
    a = complex(a)
    if a == 0:
        raise BoundaryError("periodic-type parameter a must be nonzero", "zero-parameter")
    return BoundaryMatrix(np.array([[1, 0, a, 0], [0, a, 0, 1]], dtype=complex))


def boundary_minors(A) -> Minors:
    """All six 2x2 column minors of a 2x4 matrix.

    Raises ``BoundaryError`` (code ``"rank-deficient"``) when the rows are
    linearly dependent, i.e. every minor vanishes.
    """
    arr = np.asarray(A, dtype=complex)
    if arr.shape != (2, 4):
        raise BoundaryError(f"boundary matrix must be 2x4, got {arr.shape}", "shape")
    vals = {}
    for i, j in _PAIRS:
        vals[f"A{i}{j}"] = complex(arr[0, i - 1] * arr[1, j - 1] - arr[0, j - 1] * arr[1, i - 1])
    row_scale = float(np.linalg.norm(arr[0]) * np.linalg.norm(arr[1]))
    if row_scale == 0.0 or max(abs(v) for v in vals.values()) <= 1e-13 * row_scale:
        raise BoundaryError("rows of the boundary matrix are linearly dependent",
                            "rank-deficient")
    return Minors(**vals)


@dataclass(frozen=True)
class BcClassification:
    regular: bool
    strongly_regular: bool
    periodic_type: bool
    z1: complex | None
    z2: complex | None
    degenerate_flag: bool
    # a of the normal form [[1,0,a,0],[0,a,0,1]]; only for periodic-type
    a: complex | None = None

    @property
    def subtype(self) -> str | None:
        if not self.periodic_type or self.a is None:
            return None
        if abs(self.a + 1) < 1e-12:
            return "periodic"
        if abs(self.a - 1) < 1e-12:
            return "antiperiodic"
        return "periodic-type"

    def require_regular(self) -> None:
        if self.degenerate_flag or not self.regular:
            raise BoundaryError("boundary conditions are not regular (A14*A23 = 0)",
                                "irregular")

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "regular": self.regular,
            "strongly_regular": self.strongly_regular,
            "periodic_type": self.periodic_type,
            "degenerate": self.degenerate_flag,
            "z1": None if self.z1 is None else complex_to_json(self.z1),
            "z2": None if self.z2 is None else complex_to_json(self.z2),
        }
        if self.periodic_type:
            out["subtype"] = self.subtype
            out["a"] = complex_to_json(self.a)
        return out


def classify(minors: Minors, rtol: float = 1e-10) -> BcClassification:
    """Classify boundary conditions from their minors.

    Zero tests are relative to the largest minor, so the result is invariant
    under row operations ``A -> M A`` (which scale every minor by ``det M``).
    """
    s = minors.scale()
    zero = rtol * s
    regular = abs(minors.A14 * minors.A23) > zero * s
    if not regular:
        return BcClassification(False, False, False, None, None, True)

    tr = minors.A12 + minors.A34
    disc = tr * tr + 4 * minors.A14 * minors.A23
    strongly = abs(disc) > zero * s
    if strongly:
        root = cmath.sqrt(disc)
        z1 = (tr + root) / (2 * minors.A23)
        z2 = (tr - root) / (2 * minors.A23)
    else:
        z1 = z2 = tr / (2 * minors.A23)

    periodic = (not strongly and abs(minors.A13) <= zero and abs(minors.A24) <= zero
                and abs(minors.A12 - minors.A34) <= zero)
    a = -minors.A23 / minors.A12 if periodic else None
    return BcClassification(True, strongly, periodic, z1, z2, False, a)


def principal_log(z: complex) -> complex:
    """Logarithm with imaginary part in (-pi, pi]."""
    w = cmath.log(z)
    if w.imag <= -math.pi:
        w += 2j * math.pi
    return w


def unperturbed_base(z: complex) -> complex:
    """``-(i/pi) ln z``: the unperturbed eigenvalue of index 0 for root ``z``."""
    return -1j / math.pi * principal_log(z)


def tau0(a: complex) -> complex:
    """Base point of the eigenvalue grid ``tau0 + 2n`` of periodic-type problems.

    Returned with real part in (0, 2]; ``exp(i pi tau0) = -1/a`` holds for
    every nonzero ``a``.
    """
    a = complex(a)
    if a == 0:
        raise BoundaryError("tau0 needs a nonzero parameter a", "zero-parameter")
    r = abs(a)
    phi = cmath.phase(a)
    if phi <= -math.pi:
        phi = math.pi
    # argument of conj(a), kept in (-pi, pi]
    phi_bar = math.pi if phi == math.pi else -phi
    return complex((phi_bar + math.pi) / math.pi, math.log(r) / math.pi)


def series_base_points(cls: BcClassification) -> list[complex]:
    """Base points of the unperturbed eigenvalue series (one per distinct root)."""
    cls.require_regular()
    if cls.periodic_type:
        return [tau0(cls.a)]
    if not cls.strongly_regular:
        return [unperturbed_base(cls.z1)]
    return [unperturbed_base(cls.z1), unperturbed_base(cls.z2)]


@dataclass(frozen=True)
class SpectrumEntry:
    n: int
    j: int
    lam: complex
    lam0: complex
    eps: complex
    multiplicity: int
    delta_prime: complex
    residual: float = 0.0

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "j": self.j,
            "lambda": complex_to_json(self.lam),
            "lambda0": complex_to_json(self.lam0),
            "abs_eps": abs(self.eps),
            "multiplicity": self.multiplicity,
            "abs_delta_prime": abs(self.delta_prime),
            "residual": self.residual,
        }
