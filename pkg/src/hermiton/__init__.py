"""Finite-level Schrodinger-type systems treated as Lagrangian/Hamiltonian
mechanics, up to the coupled nonlinear dynamics of a state vector and a
dynamical Hermitian scalar product."""

from . import (
    canonical,
    diagnostics,
    dynamics,
    errors,
    hermitian_algebra,
    integrate,
    models,
    oracles,
)
from .models import FullState, ModelParams, PotentialSpec, preset

__all__ = [
    "canonical",
    "diagnostics",
    "dynamics",
    "errors",
    "hermitian_algebra",
    "integrate",
    "models",
    "oracles",
    "FullState",
    "ModelParams",
    "PotentialSpec",
    "preset",
]

__version__ = "0.1.0"
