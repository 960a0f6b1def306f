"""Spectral toolkit for 1D Dirac operators with regular, not strongly regular
boundary conditions on [0, pi]."""

from dirac_spectra.core import (
    BcClassification,
    BoundaryMatrix,
    BoundaryError,
    SpectrumEntry,
    boundary_minors,
    classify,
    periodic_type_matrix,
    tau0,
)
from dirac_spectra.potentials import ExpPoly, Potential, SampledFunction

__all__ = [
    "BcClassification",
    "BoundaryError",
    "BoundaryMatrix",
    "ExpPoly",
    "Potential",
    "SampledFunction",
    "SpectrumEntry",
    "boundary_minors",
    "classify",
    "periodic_type_matrix",
    "tau0",
]

__version__ = "0.1.0"
