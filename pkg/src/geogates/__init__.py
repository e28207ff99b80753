"""Geometric quantum gates from the eigenstates of periodic invariant operators."""
from .errors import GeoGateError
from .invariant import (
    InvariantFrame,
    PhaseReport,
    SingleQubitDrive,
    TwoQubitDrive,
    drive_frame,
    eigenframe,
    phase_decomposition,
)
from .propagate import GateResult, Propagator, analytic_propagator, cyclic_gate, numeric_propagator
from .gatesynth import build_controlled_u, find_cycles, synthesize_single_qubit_phase

__version__ = "0.1.0"
