"""Classical and quantum asymmetric multibaker map.

Exact unitary evolution of the quantum multibaker (lattice walker whose
internal coin is the asymmetric quantum baker), Monte Carlo ensembles for
the classical map, and the coarse-grained current observables shared by
both.
"""

from multibaker.errors import InvalidParameterError, InvariantViolation
from multibaker.hilbert import MapParams, build_aft, build_baker
from multibaker.qlattice import LatticeWavefunction, MixedState, evolve, initial_state, quantum_step
from multibaker.observables import (
    CurrentSeries,
    LatticeDistribution,
    average_current,
    check_s1_antisymmetry,
    coarse_probability,
    current,
    mean_position,
    smooth,
)

__version__ = "0.1.0"

__all__ = [
    "InvalidParameterError",
    "InvariantViolation",
    "MapParams",
    "build_aft",
    "build_baker",
    "LatticeWavefunction",
    "MixedState",
    "evolve",
    "initial_state",
    "quantum_step",
    "CurrentSeries",
    "LatticeDistribution",
    "average_current",
    "check_s1_antisymmetry",
    "coarse_probability",
    "current",
    "mean_position",
    "smooth",
]
