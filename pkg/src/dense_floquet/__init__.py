"""Perturbed eigenvalue 0 of the Floquet operator K + beta V with dense point spectrum.

K = -i omega d/dt - d^2/dx^2 on the two-torus and V = 4 cos t cos x.  The
package computes the Rayleigh-Schroedinger coefficients of the eigenvalue
branch through 0, the non-resonance sets that keep small denominators under
control, the compensated resolvent series, the fixed-point curve lambda(beta)
and an independent finite-matrix oracle.
"""
from __future__ import annotations

from .errors import FloquetError
from .lattice import LatticeIndex, ModelParams, critical_set, eigenvalue, locality_gap

__version__ = "0.1.0"

__all__ = [
    "FloquetError",
    "LatticeIndex",
    "ModelParams",
    "__version__",
    "critical_set",
    "eigenvalue",
    "locality_gap",
]
