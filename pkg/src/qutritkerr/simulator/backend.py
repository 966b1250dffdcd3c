"""Noisy execution backend used by the benchmarking protocols."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .circuit import Circuit
from .engine import probabilities, run, sample_shots, zero_state
from .gates import Gate


@dataclass
class NoiseModel:
    """Channels inserted after gates of a given kind, plus readout confusion.

    Each entry of ``after`` maps a gate kind to ``(kind, params, matrix)``
    templates applied to the same targets, in order.
    """

    after: Dict[str, List[Tuple[str, tuple, Optional[np.ndarray]]]] = field(default_factory=dict)
    readout: Optional[np.ndarray] = None

    def add_depolarizing(self, kind: str, p: float) -> "NoiseModel":
        self.after.setdefault(kind, []).append(("DepolarizeChannel", (p,), None))
        return self

    def add_unitary(self, kind: str, matrix: np.ndarray) -> "NoiseModel":
        self.after.setdefault(kind, []).append(("CustomUnitary", (), np.asarray(matrix, complex)))
        return self

    def expand(self, circuit: Circuit) -> Circuit:
        ops: List[Gate] = []
        for op in circuit.ops:
            ops.append(op)
            for kind, params, matrix in self.after.get(op.kind, ()):
                ops.append(Gate(kind, op.targets, params, matrix))
        return Circuit(circuit.n_qutrits, ops, circuit.seed, circuit.label)

    @property
    def is_trivial(self) -> bool:
        return not self.after and self.readout is None


class SimulatorBackend:
    """Runs circuits from ``|0...0>`` and samples shots.

    Every ``run`` call consumes the supplied generator only, so callers that
    spawn one generator per circuit get reproducible, order-independent
    results.
    """

    def __init__(self, noise: Optional[NoiseModel] = None, seed: Optional[int] = None):
        self.noise = noise or NoiseModel()
        self._rng = np.random.default_rng(seed)

    def final_state(self, circuit: Circuit, initial: Optional[np.ndarray] = None) -> np.ndarray:
        full = self.noise.expand(circuit)
        if initial is None:
            initial = zero_state(circuit.n_qutrits, density=full.has_channels)
        elif full.has_channels and np.ndim(initial) == 1:
            initial = np.outer(initial, np.conj(initial))
        return run(full, initial)

    def probabilities(self, circuit: Circuit, initial: Optional[np.ndarray] = None) -> np.ndarray:
        p = probabilities(self.final_state(circuit, initial))
        if self.noise.readout is not None:
            p = self.noise.readout @ p
        return p

    def run(self, circuit: Circuit, shots: int, rng: Optional[np.random.Generator] = None,
            initial: Optional[np.ndarray] = None) -> np.ndarray:
        rng = self._rng if rng is None else rng
        return sample_shots(self.final_state(circuit, initial), shots, rng, self.noise.readout)
