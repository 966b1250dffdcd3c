"""State-vector and density-matrix execution of circuits."""
from __future__ import annotations

from typing import Optional

import numpy as np

from .circuit import Circuit
from .gates import Gate


def _apply_left(op: np.ndarray, tensor: np.ndarray, targets, n_axes: int, offset: int = 0):
    """Contract ``op`` into the given qutrit axes of a rank-``n_axes`` tensor."""
    k = len(targets)
    op_t = op.reshape((3,) * (2 * k))
    axes = [offset + t for t in targets]
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the new axes first; move them back in place
    return np.moveaxis(out, list(range(k)), axes)


def apply_unitary_vector(u: np.ndarray, psi: np.ndarray, targets, n: int) -> np.ndarray:
    t = psi.reshape((3,) * n)
    return _apply_left(u, t, targets, n).reshape(-1)


def apply_unitary_density(u: np.ndarray, rho: np.ndarray, targets, n: int) -> np.ndarray:
    t = rho.reshape((3,) * (2 * n))
    t = _apply_left(u, t, targets, 2 * n)
    t = _apply_left(u.conj(), t, targets, 2 * n, offset=n)
    dim = 3 ** n
    return t.reshape(dim, dim)


def depolarize_targets(rho: np.ndarray, p: float, targets, n: int) -> np.ndarray:
    """``p rho + (1 - p) (I_T / 3^k) (x) tr_T(rho)`` on the target qutrits."""
    dim = 3 ** n
    targets = list(targets)
    if sorted(targets) == list(range(n)):
        return p * rho + (1 - p) * np.trace(rho) * np.eye(dim) / dim
    t = rho.reshape((3,) * (2 * n))
    rest = [q for q in range(n) if q not in targets]
    reduced = np.trace(t.transpose(targets + [n + q for q in targets] + rest + [n + q for q in rest])
                       .reshape(3 ** len(targets), 3 ** len(targets), -1), axis1=0, axis2=1)
    reduced = reduced.reshape((3,) * (2 * len(rest)))
    ident = np.eye(3 ** len(targets)).reshape((3,) * (2 * len(targets))) / 3 ** len(targets)
    # build I_T (x) reduced with axes ordered (T rows, rest rows, T cols, rest cols)
    k = len(targets)
    r = len(rest)
    full = np.multiply.outer(ident, reduced)
    order_rows = list(range(k)) + list(range(2 * k, 2 * k + r))
    order_cols = list(range(k, 2 * k)) + list(range(2 * k + r, 2 * k + 2 * r))
    full = full.transpose(order_rows + order_cols)
    # current qutrit order is targets + rest; restore natural order
    perm = targets + rest
    inv = np.argsort(perm)
    full = full.transpose(list(inv) + [n + i for i in inv])
    return p * rho + (1 - p) * full.reshape(dim, dim)


def apply_gate_to_operator(op: Gate, u: np.ndarray, n: int) -> np.ndarray:
    """Left-multiply a full ``3**n`` operator by a gate."""
    dim = 3 ** n
    t = u.reshape((3,) * n + (dim,))
    return _apply_left(op.unitary(), t, op.targets, n + 1).reshape(dim, dim)


def zero_state(n: int, density: bool = False) -> np.ndarray:
    dim = 3 ** n
    psi = np.zeros(dim, dtype=complex)
    psi[0] = 1
    return np.outer(psi, psi) if density else psi


def run(circuit: Circuit, initial: Optional[np.ndarray] = None) -> np.ndarray:
    """Apply the circuit to a state vector or a density matrix.

    A 1-D ``initial`` selects the state-vector path, a 2-D one the
    density-matrix path; circuits with channel gates need the latter.
    """
    n = circuit.n_qutrits
    dim = 3 ** n
    if initial is None:
        initial = zero_state(n, density=circuit.has_channels)
    state = np.array(initial, dtype=complex)
    if state.ndim == 1:
        if state.shape != (dim,):
            raise ValueError("state dimension does not match circuit")
        if circuit.has_channels:
            raise ValueError("channel gates require a density-matrix input")
        for op in circuit.ops:
            state = apply_unitary_vector(op.unitary(), state, op.targets, n)
        return state
    if state.shape != (dim, dim):
        raise ValueError("density matrix dimension does not match circuit")
    for op in circuit.ops:
        if op.is_channel:
            state = depolarize_targets(state, op.params[0], op.targets, n)
        else:
            state = apply_unitary_density(op.unitary(), state, op.targets, n)
    return state


def probabilities(state: np.ndarray) -> np.ndarray:
    """Born probabilities in the computational basis (clipped, renormalized)."""
    p = np.abs(state) ** 2 if state.ndim == 1 else np.real(np.diag(state))
    p = np.clip(p, 0, None)
    return p / p.sum()


def tritstrings(n: int) -> list:
    return [np.base_repr(i, 3).zfill(n) for i in range(3 ** n)]


def sample_shots(state: np.ndarray, n_shots: int, rng: np.random.Generator,
                 confusion: Optional[np.ndarray] = None) -> np.ndarray:
    """Multinomial counts over tritstrings (index = base-3 value).

    ``confusion[i, j]`` is the probability of reading ``i`` when the true
    outcome is ``j``; columns must sum to one.
    """
    p = probabilities(state)
    if confusion is not None:
        confusion = np.asarray(confusion, dtype=float)
        if confusion.shape != (p.size, p.size):
            raise ValueError("confusion matrix has the wrong shape")
        if np.any(confusion < -1e-12) or not np.allclose(confusion.sum(axis=0), 1, atol=1e-9):
            raise ValueError("confusion matrix must be column stochastic")
        p = np.clip(confusion @ p, 0, None)
        p /= p.sum()
    return rng.multinomial(n_shots, p)


def counts_dict(counts: np.ndarray) -> dict:
    n = int(round(np.log(len(counts)) / np.log(3)))
    return {s: int(c) for s, c in zip(tritstrings(n), counts) if c}
