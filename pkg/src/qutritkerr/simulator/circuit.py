"""Circuit container and its JSON wire format."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from .gates import Gate


@dataclass
class Circuit:
    n_qutrits: int
    ops: List[Gate] = field(default_factory=list)
    seed: Optional[int] = None
    label: str = ""

    def __post_init__(self):
        for op in self.ops:
            self._check(op)

    def _check(self, op: Gate):
        if any(t >= self.n_qutrits or t < 0 for t in op.targets):
            raise ValueError(f"{op!r} targets outside a {self.n_qutrits}-qutrit circuit")

    def append(self, op: Gate) -> "Circuit":
        self._check(op)
        self.ops.append(op)
        return self

    def extend(self, ops) -> "Circuit":
        for op in ops:
            self.append(op)
        return self

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qutrits != self.n_qutrits:
            raise ValueError("qutrit count mismatch")
        return Circuit(self.n_qutrits, self.ops + other.ops, self.seed, self.label)

    def __len__(self):
        return len(self.ops)

    @property
    def has_channels(self) -> bool:
        return any(op.is_channel for op in self.ops)

    def unitary(self, skip_channels: bool = False) -> np.ndarray:
        """Full ``3**n`` unitary of a channel-free circuit."""
        from .engine import apply_gate_to_operator

        u = np.eye(3 ** self.n_qutrits, dtype=complex)
        for op in self.ops:
            if op.is_channel:
                if skip_channels:
                    continue
                raise ValueError("circuit contains a channel; it has no unitary")
            u = apply_gate_to_operator(op, u, self.n_qutrits)
        return u

    def to_dict(self) -> dict:
        return {
            "n_qutrits": self.n_qutrits,
            "ops": [_gate_to_dict(op) for op in self.ops],
            "seed": self.seed,
            "label": self.label,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Circuit":
        ops = [_gate_from_dict(d) for d in data["ops"]]
        return cls(int(data["n_qutrits"]), ops, data.get("seed"), data.get("label", ""))

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


def encode_angle(value: float):
    """Exact rational multiples of pi are stored as ``{"pi": [num, den]}``."""
    frac = Fraction(value / math.pi).limit_denominator(1000)
    if frac.denominator <= 1000 and frac.numerator * math.pi / frac.denominator == value:
        return {"pi": [frac.numerator, frac.denominator]}
    return value


def decode_angle(value) -> float:
    if isinstance(value, dict):
        num, den = value["pi"]
        return num * math.pi / den
    return float(value)


def _gate_to_dict(op: Gate) -> dict:
    if op.kind == "CustomUnitary":
        params = [[float(z.real), float(z.imag)] for z in op.matrix.reshape(-1)]
    else:
        params = [encode_angle(p) for p in op.params]
    return {"kind": op.kind, "targets": list(op.targets), "params": params}


def _gate_from_dict(d: dict) -> Gate:
    kind, targets = d["kind"], tuple(d["targets"])
    if kind == "CustomUnitary":
        flat = np.array([complex(re, im) for re, im in d["params"]])
        dim = int(round(math.sqrt(flat.size)))
        return Gate(kind, targets, (), flat.reshape(dim, dim))
    return Gate(kind, targets, tuple(decode_angle(p) for p in d["params"]))
