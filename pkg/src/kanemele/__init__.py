"""Spin transport in the extended Kane-Mele model."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    GapTooSmall,
    KaneMeleError,
    NoGap,
    NonConvergence,
    PhaseError,
    RefineGrid,
    SingularFiber,
    SingularInput,
    SingularParameters,
)
from .geometry import dirac_points, lattice_vectors
from .model import ModelParams, bloch_gradient, bloch_hamiltonian
from .numerics import QuadratureSpec, eigh
from .spectrum import bands, classify_phase, critical_curve, critical_energy, local_gap
from .kubo import ConductivityResult, spin_conductivity_kubo
from .matsubara import spin_conductivity_matsubara
from .topology import chern_number, deviation_scaling, spin_chern
from .criticality import jump_closed_form, jump_numeric
from .realspace import build_flake, flake_spin_conductivity
