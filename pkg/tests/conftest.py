import functools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dirac_spectra.core import BoundaryMatrix, periodic_type_matrix  # noqa: E402
from dirac_spectra.potentials import ExpPoly, Potential, builtin_potential  # noqa: E402

# Non-periodic-type, regular, not strongly regular (A24 = 0, double root z = -1).
NONPERIODIC_1 = np.array([[1, 0, 1, 0], [0, 1, 1, 1]], dtype=complex)
NONPERIODIC_2 = np.array([[1, 0, 1, 1], [0, 1, 0, 1]], dtype=complex)


@pytest.fixture(scope="session")
def smooth():
    return builtin_potential("endpoint-smooth")


@pytest.fixture(scope="session")
def antiperiodic():
    return periodic_type_matrix(1)


@pytest.fixture(scope="session")
def periodic():
    return periodic_type_matrix(-1)


@pytest.fixture(scope="session")
def nonperiodic():
    return BoundaryMatrix(NONPERIODIC_1)


@functools.lru_cache(maxsize=None)
def theorem2_build():
    from dirac_spectra.counterexample import build_theorem2
    return build_theorem2()


@functools.lru_cache(maxsize=None)
def theorem2_report():
    from dirac_spectra.counterexample import verify_divergence
    return verify_divergence(theorem2_build())


@functools.lru_cache(maxsize=None)
def smooth_spectrum(a: float, N: int):
    from dirac_spectra.spectrum import locate_eigenvalues
    return locate_eigenvalues(builtin_potential("endpoint-smooth"),
                              periodic_type_matrix(a).minors, (-N, N))


def q_only_potential() -> Potential:
    """P = 0, Q smooth: with A24 = 0 the characteristic function stays free."""
    return Potential(ExpPoly.zero(), ExpPoly([0.3, -0.3, 0.2], [1.0, -1.0, 0.0]))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
