"""Qutrit circuit simulation."""
from .backend import NoiseModel, SimulatorBackend
from .circuit import Circuit, decode_angle, encode_angle
from .decompose import count_pulses, decompose_su3, gates_product
from .engine import counts_dict, probabilities, run, sample_shots, tritstrings, zero_state
from .gates import Gate, native_gate_matrix, subspace_controlled_gates
from .sampling import haar_su3, haar_su9, random_clifford2

__all__ = [
    "Circuit", "Gate", "NoiseModel", "SimulatorBackend", "count_pulses", "counts_dict",
    "decode_angle", "decompose_su3", "encode_angle", "gates_product", "haar_su3", "haar_su9",
    "native_gate_matrix", "probabilities", "random_clifford2", "run", "sample_shots",
    "subspace_controlled_gates", "tritstrings", "zero_state",
]
