"""Pointer states of a two-level system coupled to an environment.

The package simulates the joint pure-state dynamics of a qubit and a finite
environment, finds initial qubit states that stay unentangled, and tests the
block-structure conditions under which those states are time independent.
"""

from .evolution import EvolutionDecomposition, HamiltonianModel, TimeGrid, decompose, propagate
from .exceptions import (
    CapacityError,
    DegenerateBranchError,
    EmptyProfileError,
    InvalidArgumentError,
    NumericFailureError,
    PointerBrokenError,
    PointerLabError,
    TruncationError,
)
from .hilbert import BipartiteState, entanglement_entropy, partial_trace_system, schmidt, tensor
from .models import JCMParams, SBMParams, SpinSpinParams
from .pointer import PointerCandidate, parallelism_defect, scan_pointer_candidates

__version__ = "0.1.0"
