"""Driven two-transmon cross-Kerr physics and CZ calibration."""
from .calibrate import (
    TARGETS, CalibrationReport, SearchConfig, calibrate_gate, optimal_virtual_z, solve_drive_time,
    unitary_process_fidelity,
)
from .device import (
    GHZ, MHZ, NS, PRESETS, TWO_PI, US, DeviceParams, DriveParams, DriveSegment, Echo,
    PulseSchedule, gate_schedule, midpoint_drive_frequency, preset,
)
from .hamiltonian import collapse_operators, drive_hamiltonian, rwa_hamiltonian, static_hamiltonian
from .perturbative import AlphaRates, PerturbativeSingularity, alpha_driven, alpha_static, alpha_total
from .phases import LeakageError, extract_entangling_phases, rates_from_phases
from .propagate import (
    IntegrationError, propagate, propagate_channel, propagate_unitary, virtual_z_matrix,
)
from .ramsey import PhaseUnwrapError, RamseyResult, alpha_from_propagation, ramsey_protocol_sim

__all__ = [
    "AlphaRates", "CalibrationReport", "DeviceParams", "DriveParams", "DriveSegment", "Echo",
    "GHZ", "IntegrationError", "LeakageError", "MHZ", "NS", "PRESETS", "PerturbativeSingularity",
    "PhaseUnwrapError", "PulseSchedule", "RamseyResult", "SearchConfig", "TARGETS", "TWO_PI", "US",
    "alpha_driven", "alpha_from_propagation", "alpha_static", "alpha_total", "calibrate_gate",
    "collapse_operators", "drive_hamiltonian", "extract_entangling_phases", "gate_schedule",
    "midpoint_drive_frequency", "optimal_virtual_z", "preset", "propagate", "propagate_channel",
    "propagate_unitary", "ramsey_protocol_sim", "rates_from_phases", "rwa_hamiltonian",
    "solve_drive_time", "static_hamiltonian", "unitary_process_fidelity", "virtual_z_matrix",
]
