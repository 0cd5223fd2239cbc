"""Numerical toolkit for heat and Levy-Ornstein-Uhlenbeck semigroups on

step-2 Carnot groups: group structure, symplectic spectral data, exact
polynomial calculus for the generators, closed-form partial-Fourier kernels
with real-space inversion, Hermite/Weyl transforms, intertwining checks,
and Monte Carlo simulation.
"""

from .groups import (
    CarnotGroup,
    GroupElement,
    free_step2,
    h_type,
    heisenberg,
    homogeneous_norm,
    nonisotropic_heisenberg,
    quaternionic_h_type,
)
from .levy import AtomJumps, CompoundPoisson, LevyExponent, NormalDist, StableJumps
from .spectral import frame_at, harmonic_eigenvalue, spectrum_of_generator

__version__ = "0.1.0"

__all__ = [
    "CarnotGroup",
    "GroupElement",
    "heisenberg",
    "nonisotropic_heisenberg",
    "h_type",
    "quaternionic_h_type",
    "free_step2",
    "homogeneous_norm",
    "LevyExponent",
    "CompoundPoisson",
    "StableJumps",
    "AtomJumps",
    "NormalDist",
    "frame_at",
    "harmonic_eigenvalue",
    "spectrum_of_generator",
    "__version__",
]
