"""Native qutrit gates, two-qutrit entanglers and channel markers."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import expm

from ..algebra import OMEGA, gellmann_matrix

SINGLE_QUTRIT_KINDS = (
    "X01_half", "X12_half", "X01_pi", "X12_pi",
    "Y01_half", "Y12_half", "Y01_pi", "Y12_pi",
    "Z01", "Z12", "H3", "S3", "SU3",
)
TWO_QUTRIT_KINDS = ("CZ", "CZdag", "CSUM", "Cex", "Cinc")
ANY_ARITY_KINDS = ("CustomUnitary", "DepolarizeChannel")
ALL_KINDS = SINGLE_QUTRIT_KINDS + TWO_QUTRIT_KINDS + ANY_ARITY_KINDS
PARAM_COUNTS = {"Z01": 1, "Z12": 1, "SU3": 8, "DepolarizeChannel": 1}


def _subspace_generator(kind: str, j: int, k: int) -> np.ndarray:
    g = np.zeros((3, 3), dtype=complex)
    if kind == "X":
        g[j, k] = g[k, j] = 1
    else:
        # Y^{jk} = i|j><k| - i|k><j|
        g[j, k], g[k, j] = 1j, -1j
    return g


def subspace_rotation(axis: str, j: int, k: int, angle: float) -> np.ndarray:
    """``exp(-i angle/2 G)`` with ``G`` the X or Y generator on levels ``j, k``."""
    return expm(-0.5j * angle * _subspace_generator(axis, j, k))


def z01(phi: float) -> np.ndarray:
    return np.diag([np.exp(-1j * phi), 1, 1])


def z12(phi: float) -> np.ndarray:
    return np.diag([1, 1, np.exp(1j * phi)])


def su3(params) -> np.ndarray:
    """``exp(-i sum_k theta_k lambda_k)``; zero parameters give the identity."""
    params = np.asarray(params, dtype=float)
    if params.shape != (8,):
        raise ValueError("SU3 takes 8 parameters")
    h = np.einsum("k,kij->ij", params, _LAMBDAS)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)) @ v.conj().T


_LAMBDAS = np.array([gellmann_matrix(i) for i in range(1, 9)])


def hadamard3() -> np.ndarray:
    j, k = np.meshgrid(range(3), range(3), indexing="ij")
    return OMEGA ** (j * k) / np.sqrt(3)


def cz_matrix(power: int = 1) -> np.ndarray:
    i, j = np.divmod(np.arange(9), 3)
    return np.diag(OMEGA ** (power * i * j))


def csum_matrix() -> np.ndarray:
    u = np.zeros((9, 9), dtype=complex)
    for i in range(3):
        for j in range(3):
            u[3 * i + (i + j) % 3, 3 * i + j] = 1
    return u


def subspace_controlled(target_op: np.ndarray, control_state: int = 2) -> np.ndarray:
    """``sum_{c != control} |c><c| (x) I + |control><control| (x) target_op``."""
    proj = np.zeros((3, 3))
    proj[control_state, control_state] = 1
    return np.kron(np.eye(3) - proj, np.eye(3)) + np.kron(proj, target_op)


def cinc_matrix(control_state: int = 2) -> np.ndarray:
    return subspace_controlled(np.roll(np.eye(3), 1, axis=0), control_state)


def cex_matrix(control_state: int = 2) -> np.ndarray:
    swap01 = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=complex)
    return subspace_controlled(swap01, control_state)


@functools.lru_cache(maxsize=None)
def _fixed(kind: str) -> np.ndarray:
    table = {
        "X01_half": lambda: subspace_rotation("X", 0, 1, np.pi / 2),
        "X12_half": lambda: subspace_rotation("X", 1, 2, np.pi / 2),
        "X01_pi": lambda: subspace_rotation("X", 0, 1, np.pi),
        "X12_pi": lambda: subspace_rotation("X", 1, 2, np.pi),
        "Y01_half": lambda: subspace_rotation("Y", 0, 1, np.pi / 2),
        "Y12_half": lambda: subspace_rotation("Y", 1, 2, np.pi / 2),
        "Y01_pi": lambda: subspace_rotation("Y", 0, 1, np.pi),
        "Y12_pi": lambda: subspace_rotation("Y", 1, 2, np.pi),
        "H3": hadamard3,
        "S3": lambda: np.diag([1, 1, OMEGA]),
        "CZ": lambda: cz_matrix(1),
        "CZdag": lambda: cz_matrix(2),
        "CSUM": csum_matrix,
    }
    m = np.asarray(table[kind](), dtype=complex)
    m.setflags(write=False)
    return m


def native_gate_matrix(kind: str, params: Tuple[float, ...] = ()) -> np.ndarray:
    """Unitary of a gate kind.

    ``Z01``/``Z12`` take one angle, ``SU3`` eight, and ``Cex``/``Cinc`` an
    optional control state (default 2).
    """
    if kind == "Z01":
        return z01(params[0])
    if kind == "Z12":
        return z12(params[0])
    if kind == "SU3":
        return su3(params)
    if kind == "Cinc":
        return cinc_matrix(int(params[0]) if params else 2)
    if kind == "Cex":
        return cex_matrix(int(params[0]) if params else 2)
    if kind in ("CustomUnitary", "DepolarizeChannel"):
        raise ValueError(f"{kind} has no fixed matrix")
    if kind not in ALL_KINDS:
        raise ValueError(f"unknown gate kind {kind!r}")
    return _fixed(kind).copy()


def subspace_controlled_gates(control_state: int = 2) -> dict:
    return {"Cex": cex_matrix(control_state), "Cinc": cinc_matrix(control_state)}


@dataclass(eq=False)
class Gate:
    """One operation of a circuit.

    ``matrix`` is only used by ``CustomUnitary``; ``DepolarizeChannel``
    carries the retained-signal parameter ``p`` in ``params``.
    """

    kind: str
    targets: Tuple[int, ...]
    params: Tuple[float, ...] = ()
    matrix: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        self.targets = tuple(int(t) for t in self.targets)
        self.params = tuple(float(p) for p in self.params)
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("repeated target")
        arity = len(self.targets)
        if self.kind in SINGLE_QUTRIT_KINDS and arity != 1:
            raise ValueError(f"{self.kind} acts on one qutrit")
        if self.kind in TWO_QUTRIT_KINDS and arity != 2:
            raise ValueError(f"{self.kind} acts on two qutrits")
        expected = PARAM_COUNTS.get(self.kind)
        if expected is not None and len(self.params) != expected:
            raise ValueError(f"{self.kind} takes {expected} parameter(s)")
        if self.kind == "CustomUnitary":
            if self.matrix is None:
                raise ValueError("CustomUnitary requires a matrix")
            self.matrix = np.asarray(self.matrix, dtype=complex)
            if self.matrix.shape != (3 ** arity, 3 ** arity):
                raise ValueError("matrix size does not match targets")
        if self.kind == "DepolarizeChannel" and not 0.0 <= self.params[0] <= 1.0 + 1e-12:
            raise ValueError("depolarizing parameter must lie in [0, 1]")

    @property
    def is_channel(self) -> bool:
        return self.kind == "DepolarizeChannel"

    def unitary(self) -> np.ndarray:
        if self.kind == "CustomUnitary":
            return self.matrix
        return native_gate_matrix(self.kind, self.params)

    def __repr__(self):
        p = f", {self.params}" if self.params else ""
        return f"Gate({self.kind}, {self.targets}{p})"
