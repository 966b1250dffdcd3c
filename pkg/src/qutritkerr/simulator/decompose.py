"""Compilation of single-qutrit unitaries into native pulses and virtual Z gates."""
from __future__ import annotations

from typing import List

import numpy as np

from .gates import Gate, native_gate_matrix

_HALF_PI_KINDS = {(0, 1): "X01_half", (1, 2): "X12_half"}
_ANGLE_TOL = 1e-12


def _embed(v: np.ndarray, j: int, k: int) -> np.ndarray:
    g = np.eye(3, dtype=complex)
    g[np.ix_([j, k], [j, k])] = v
    return g


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


_SX = np.array([[1, -1j], [-1j, 1]]) / np.sqrt(2)  # exp(-i pi/4 sigma_x)


def _zyz(v: np.ndarray):
    """Angles with ``v = e^{i g} Rz(phi) Ry(theta) Rz(lam)``."""
    det = np.linalg.det(v)
    g = np.angle(det) / 2
    w = v * np.exp(-1j * g)
    a, b = w[0, 0], w[1, 0]
    theta = 2 * np.arctan2(abs(b), abs(a))
    if abs(b) < 1e-14:
        plus, minus = -2 * np.angle(a), 0.0
    elif abs(a) < 1e-14:
        plus, minus = 0.0, 2 * np.angle(b)
    else:
        plus, minus = -2 * np.angle(a), 2 * np.angle(b)
    return g, (plus + minus) / 2, theta, (plus - minus) / 2


def _subspace_sequence(v: np.ndarray, j: int, k: int) -> List[np.ndarray]:
    """Time-ordered diagonal/pulse factors realizing the embedded 2x2 ``v`` exactly."""
    g, phi, theta, lam = _zyz(v)
    sx = _embed(_SX, j, k)
    if abs(np.sin(theta)) < 1e-14 and abs(np.cos(theta / 2)) > 0.5:
        return [_embed(v, j, k)]  # already diagonal
    if abs(theta - np.pi / 2) < 1e-14:
        # Ry(pi/2) = Rz(pi/2) SX Rz(-pi/2)
        seq = [_rz(lam - np.pi / 2), sx, _rz(phi + np.pi / 2)]
    else:
        # Rz(phi) Ry(theta) Rz(lam) ~ Rz(phi + pi) SX Rz(theta + pi) SX Rz(lam)
        seq = [_rz(lam), sx, _rz(theta + np.pi), sx, _rz(phi + np.pi)]
    out = [s if s.shape == (3, 3) else _embed(s, j, k) for s in seq]
    prod = np.eye(3, dtype=complex)
    for s in out:
        prod = s @ prod
    # fix the residual phase of the two-level block relative to the spectator level
    sub = prod[np.ix_([j, k], [j, k])]
    idx = np.unravel_index(np.argmax(abs(sub)), sub.shape)
    ratio = v[idx] / sub[idx]
    out[-1] = _embed(np.eye(2) * ratio, j, k) @ out[-1]
    return out


def _diag_to_gates(d: np.ndarray) -> List[Gate]:
    """Diagonal unitary as ``Z01 Z12`` up to global phase."""
    a = -np.angle(d[0] / d[1])
    b = np.angle(d[2] / d[1])
    gates = []
    if abs(a) > _ANGLE_TOL:
        gates.append(Gate("Z01", (0,), (float(a),)))
    if abs(b) > _ANGLE_TOL:
        gates.append(Gate("Z12", (0,), (float(b),)))
    return gates


def _phase_aligned_distance(a: np.ndarray, b: np.ndarray) -> float:
    ov = np.trace(b.conj().T @ a)
    phase = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.max(np.abs(a - phase * b)))


def decompose_su3(u: np.ndarray, target: int = 0) -> List[Gate]:
    """Native pulse list whose product equals ``u`` up to global phase.

    Uses Givens elimination into three two-level rotations, each compiled
    to at most two ``X_{pi/2}`` pulses, so at most six physical pulses are
    emitted. Diagonal factors become virtual ``Z01``/``Z12`` gates. Gates
    are returned in application order.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (3, 3):
        raise ValueError("expected a 3x3 matrix")
    if np.max(np.abs(u.conj().T @ u - np.eye(3))) > 1e-10:
        raise ValueError("input is not unitary")
    for kind in ("X01_half", "X12_half", "X01_pi", "X12_pi"):
        if _phase_aligned_distance(u, native_gate_matrix(kind)) < 1e-12:
            return _retarget([Gate(kind, (0,))], target)

    factors: List[np.ndarray] = []  # left factors to undo, in elimination order
    w = u.copy()
    # zero w[2,0] using levels 1,2
    for (j, k) in ((1, 2), (0, 1)):
        a, b = w[j, 0], w[k, 0]
        r = np.hypot(abs(a), abs(b))
        if abs(b) < 1e-15:
            g2 = np.eye(2, dtype=complex)
        else:
            g2 = np.array([[a.conj(), b.conj()], [-b, a]]) / r
        g = _embed(g2, j, k)
        w = g @ w
        factors.append(g)
    # remaining block on levels 1,2
    blk = w[1:, 1:]
    g = _embed(blk.conj().T, 1, 2)
    w = g @ w
    factors.append(g)
    diag = np.diag(w).copy()
    # u = G1^dag G2^dag G3^dag D; application order: D, G3^dag, G2^dag, G1^dag
    seq = [np.diag(diag)]
    for g, (j, k) in zip(reversed(factors), ((1, 2), (0, 1), (1, 2))):
        gd = g.conj().T
        seq.extend(_subspace_sequence(gd[np.ix_([j, k], [j, k])], j, k))

    gates: List[Gate] = []
    acc = np.eye(3, dtype=complex)
    for s in seq:
        if _is_diag(s):
            acc = s @ acc
            continue
        gates.extend(_diag_to_gates(np.diag(acc)))
        acc = np.eye(3, dtype=complex)
        gates.append(Gate("X01_half" if abs(s[2, 2] - 1) < 1e-12 else "X12_half", (0,)))
    gates.extend(_diag_to_gates(np.diag(acc)))
    return _retarget(gates, target)


def _is_diag(m: np.ndarray) -> bool:
    return np.max(np.abs(m - np.diag(np.diag(m)))) < 1e-14


def _retarget(gates: List[Gate], target: int) -> List[Gate]:
    if target == 0:
        return gates
    return [Gate(g.kind, (target,), g.params) for g in gates]


def gates_product(gates: List[Gate]) -> np.ndarray:
    """Product of single-qutrit gates in application order."""
    u = np.eye(3, dtype=complex)
    for g in gates:
        u = g.unitary() @ u
    return u


def count_pulses(gates: List[Gate]) -> int:
    return sum(1 for g in gates if g.kind not in ("Z01", "Z12"))
