"""Numerical laboratory for absence of embedded eigenvalues and Rellich-type
theorems on the square lattice Z^d."""

from __future__ import annotations

from .fermi_surface import FermiSample, TorusPoint, H_lambda, h_eval, sample_fermi, singular_points
from .lattice_core import (
    Box,
    Cone,
    DisconnectedDomain,
    ExteriorDomain,
    WindowTooSmall,
    classify_domain,
    cone_contained,
    preset_domain,
    satisfies_cone_condition,
)
from .lattice_operators import AssembledOperator, LatticeField, apply_laplacian, apply_schrodinger, assemble, green_residual
from .spectral_lab import EigenReport, eigensolve, embedded_scan, essential_spectrum_probe
from .torus_harmonic import decay_condition_verdict, limiting_absorption_solve, norms, synthesize
from .unique_continuation import build_counterexample, nullspace_certificate, propagate_zeros

__version__ = "0.1.0"

__all__ = [
    "AssembledOperator",
    "Box",
    "Cone",
    "DisconnectedDomain",
    "EigenReport",
    "ExteriorDomain",
    "FermiSample",
    "H_lambda",
    "LatticeField",
    "TorusPoint",
    "WindowTooSmall",
    "apply_laplacian",
    "apply_schrodinger",
    "assemble",
    "build_counterexample",
    "classify_domain",
    "cone_contained",
    "decay_condition_verdict",
    "eigensolve",
    "embedded_scan",
    "essential_spectrum_probe",
    "green_residual",
    "h_eval",
    "limiting_absorption_solve",
    "norms",
    "nullspace_certificate",
    "preset_domain",
    "propagate_zeros",
    "sample_fermi",
    "satisfies_cone_condition",
    "singular_points",
    "synthesize",
]
