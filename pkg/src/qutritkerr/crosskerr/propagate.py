"""Time-domain propagation of echoed flat-top drive schedules.

Flat sections are exponentiated exactly; cosine ramps use a fourth-order
Magnus integrator with a fixed step and a half-step Richardson check. With
decoherence the ramps use Strang splitting of the dissipator around the
Magnus step.
"""
from __future__ import annotations

import functools
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import expm

from ..simulator.gates import subspace_rotation, z01, z12
from .device import DeviceParams, DriveSegment, Echo, PulseSchedule
from .hamiltonian import (
    collapse_operators, drive_hamiltonian, qutrit_indices, static_hamiltonian,
)

STEPS_PER_PERIOD = 50
RICHARDSON_TOL = 1e-7
MAX_REFINEMENTS = 4
_GL = np.sqrt(3) / 6


class IntegrationError(RuntimeError):
    """Raised when the half-step check does not meet tolerance."""


def envelope(t, total: float, ramp: float):
    """Flat-top cosine envelope on ``[0, total]``."""
    t = np.asarray(t, dtype=float)
    out = np.ones_like(t)
    if ramp > 0:
        up = t < ramp
        down = t > total - ramp
        out[up] = 0.5 * (1 - np.cos(np.pi * t[up] / ramp))
        out[down] = 0.5 * (1 - np.cos(np.pi * (total - t[down]) / ramp))
    out[(t < 0) | (t > total)] = 0.0
    return out


def _herm_expm(k: np.ndarray) -> np.ndarray:
    """``exp(-i K)`` for Hermitian ``K``."""
    w, v = np.linalg.eigh(k)
    return (v * np.exp(-1j * w)) @ v.conj().T


def _step_size(h0: np.ndarray, hd: np.ndarray) -> float:
    w = np.linalg.eigvalsh(h0)
    # spectral half-width: a scalar offset only adds a global phase
    f_max = ((w[-1] - w[0]) / 2 + np.linalg.norm(hd, 2)) / (2 * np.pi)
    return 1.0 / (STEPS_PER_PERIOD * max(f_max, 1.0))


def _ramp_generators(h0: np.ndarray, hd: np.ndarray, ramp: float, rising: bool, n_steps: int) -> np.ndarray:
    """Hermitian fourth-order Magnus exponents ``K_k`` with ``U_k = exp(-i K_k)``."""
    h = ramp / n_steps
    k = np.arange(n_steps)
    t1 = (k + 0.5 - _GL) * h
    t2 = (k + 0.5 + _GL) * h
    s1 = 0.5 * (1 - np.cos(np.pi * t1 / ramp))
    s2 = 0.5 * (1 - np.cos(np.pi * t2 / ramp))
    if not rising:
        s1, s2 = 1 - s1, 1 - s2
    a1 = h0 + s1[:, None, None] * hd
    a2 = h0 + s2[:, None, None] * hd
    kmat = 0.5 * h * (a1 + a2) + 1j * (np.sqrt(3) / 12) * h * h * (a1 @ a2 - a2 @ a1)
    return (kmat + np.conj(np.swapaxes(kmat, 1, 2))) / 2


def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """``M_{n-1} ... M_1 M_0`` by pairwise reduction."""
    while len(mats) > 1:
        if len(mats) % 2:
            mats = np.concatenate([mats, np.eye(mats.shape[1])[None]], axis=0)
        mats = mats[1::2] @ mats[0::2]
    return mats[0]


def _magnus_ramp(h0: np.ndarray, hd: np.ndarray, ramp: float, rising: bool, n_steps: int) -> np.ndarray:
    """Fourth-order Magnus propagator across one cosine ramp."""
    w, v = np.linalg.eigh(_ramp_generators(h0, hd, ramp, rising, n_steps))
    steps = (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))
    return _ordered_product(steps)


def _checked_ramp(h0, hd, ramp, rising, tol=RICHARDSON_TOL) -> np.ndarray:
    if ramp <= 0:
        return np.eye(h0.shape[0], dtype=complex)
    w = np.linalg.eigvalsh(h0)
    shift = (w[0] + w[-1]) / 2
    h0 = h0 - shift * np.eye(h0.shape[0])
    phase = np.exp(-1j * shift * ramp)
    n = max(2, int(np.ceil(ramp / _step_size(h0, hd))))
    coarse = _magnus_ramp(h0, hd, ramp, rising, n)
    for _ in range(MAX_REFINEMENTS):
        fine = _magnus_ramp(h0, hd, ramp, rising, 2 * n)
        # fourth-order Richardson estimate of the fine-step error
        err = np.max(np.abs(fine - coarse)) / 15
        if err < tol:
            return phase * fine
        coarse, n = fine, 2 * n
    raise IntegrationError(f"ramp integration error {err:.2e} exceeds {tol:.1e}")


@functools.lru_cache(maxsize=64)
def _dressed_frame_cached(device: DeviceParams) -> np.ndarray:
    h = static_hamiltonian(device, 0.0)
    d = device.d_trunc
    _, v = np.linalg.eigh(h)
    overlap = np.abs(v) ** 2
    order = np.empty(d * d, dtype=int)
    taken = np.zeros(d * d, dtype=bool)
    # lowest-excitation labels pick first
    for b in np.argsort(np.add.outer(np.arange(d), np.arange(d)).ravel(), kind="stable"):
        k = int(np.argmax(np.where(taken, -1.0, overlap[b])))
        taken[k] = True
        order[b] = k
    frame = v[:, order]
    diag = np.diag(frame)
    frame = frame * (np.abs(diag) / diag)
    frame.flags.writeable = False
    return frame


def dressed_frame(device: DeviceParams) -> np.ndarray:
    """Undriven eigenvectors labelled by bare occupation, as columns.

    Independent of the drive frequency: the rotating frame shifts the
    Hamiltonian by a multiple of the conserved excitation number.
    """
    return _dressed_frame_cached(device.without_decoherence())


def _echo_full(device: DeviceParams) -> np.ndarray:
    """Ideal X12 pi pulses acting on the dressed computational states."""
    d = device.d_trunc
    x = np.eye(d, dtype=complex)
    x[:3, :3] = subspace_rotation("X", 1, 2, np.pi)
    v = dressed_frame(device)
    return v @ np.kron(x, x) @ v.conj().T


def virtual_z_matrix(angles) -> np.ndarray:
    """Local diagonal correction ``(Z01 Z12) (x) (Z01 Z12)`` on the qutrit pair."""
    a0, b0, a1, b1 = angles
    return np.kron(z12(b0) @ z01(a0), z12(b1) @ z01(a1))


def _segment_unitary(device: DeviceParams, seg: DriveSegment) -> np.ndarray:
    h0 = static_hamiltonian(device, seg.drive.omega_d)
    hd = drive_hamiltonian(device, seg.drive)
    u_up = _checked_ramp(h0, hd, seg.ramp, True)
    u_flat = _herm_expm((h0 + hd) * (seg.total - 2 * seg.ramp))
    u_down = _checked_ramp(h0, hd, seg.ramp, False)
    return u_down @ u_flat @ u_up


def _drive_frequency(schedule: PulseSchedule) -> float:
    freqs = {seg.drive.omega_d for seg in schedule.segments if isinstance(seg, DriveSegment)}
    if len(freqs) > 1:
        raise ValueError("all drive segments must share one drive frequency")
    return freqs.pop() if freqs else 0.0


def propagate_full(device: DeviceParams, schedule: PulseSchedule) -> np.ndarray:
    """Closed-system propagator on the truncated space in the bare basis and drive frame."""
    d = device.d_trunc
    u = np.eye(d * d, dtype=complex)
    echo = _echo_full(device)
    _drive_frequency(schedule)
    cache = {}
    for seg in schedule.segments:
        if isinstance(seg, Echo):
            u = echo @ u
            continue
        if seg not in cache:
            cache[seg] = _segment_unitary(device, seg)
        u = cache[seg] @ u
    return u


def _qutrit_block(device: DeviceParams, full: np.ndarray) -> np.ndarray:
    v = dressed_frame(device)
    idx = qutrit_indices(device.d_trunc)
    return (v.conj().T @ full @ v)[np.ix_(idx, idx)]


def propagate_unitary(device: DeviceParams, schedule: PulseSchedule,
                      apply_virtual_z: bool = True) -> np.ndarray:
    """Nine-level block of the propagator in the undriven dressed basis."""
    u = _qutrit_block(device, propagate_full(device, schedule))
    if apply_virtual_z:
        u = virtual_z_matrix(schedule.virtual_z) @ u
    return u


# ---------------------------------------------------------------- open system

def _liouvillian_parts(h: np.ndarray, cops) -> Tuple[np.ndarray, np.ndarray]:
    """Column-stacking superoperators of the Hamiltonian and the dissipator."""
    n = h.shape[0]
    eye = np.eye(n)
    lh = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    ld = np.zeros((n * n, n * n), complex)
    for c in cops:
        cdc = c.conj().T @ c
        ld += np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
    return lh, ld


def _unitary_super(u: np.ndarray) -> np.ndarray:
    return np.kron(u.conj(), u)


def _open_ramp(h0, hd, ld, ramp, rising) -> np.ndarray:
    n2 = ld.shape[0]
    if ramp <= 0:
        return np.eye(n2, dtype=complex)
    n = max(2, int(np.ceil(ramp / _step_size(h0, hd))))
    half = expm(ld * (ramp / n) / 2)
    w, v = np.linalg.eigh(_ramp_generators(h0, hd, ramp, rising, n))
    s = np.eye(n2, dtype=complex)
    for k in range(n):
        u = (v[k] * np.exp(-1j * w[k])) @ v[k].conj().T
        s = half @ (_unitary_super(u) @ (half @ s))
    return s


def propagate_channel(device: DeviceParams, schedule: PulseSchedule,
                      apply_virtual_z: bool = True) -> np.ndarray:
    """Choi matrix (qutrit block, dressed basis) of the Lindblad evolution.

    Leakage out of the qutrit block makes the map trace-decreasing.
    """
    d = device.d_trunc
    n = d * d
    cops = collapse_operators(device)
    s_tot = np.eye(n * n, dtype=complex)
    echo = _unitary_super(_echo_full(device))
    _drive_frequency(schedule)
    cache = {}
    for seg in schedule.segments:
        if isinstance(seg, Echo):
            s_tot = echo @ s_tot
            continue
        if seg in cache:
            s_tot = cache[seg] @ s_tot
            continue
        h0 = static_hamiltonian(device, seg.drive.omega_d)
        hd = drive_hamiltonian(device, seg.drive)
        lh, ld = _liouvillian_parts(h0 + hd, cops)
        up = _open_ramp(h0, hd, ld, seg.ramp, True)
        flat = expm((lh + ld) * (seg.total - 2 * seg.ramp))
        down = _open_ramp(h0, hd, ld, seg.ramp, False)
        cache[seg] = down @ flat @ up
        s_tot = cache[seg] @ s_tot
    v = dressed_frame(device)
    s_tot = _unitary_super(v.conj().T) @ s_tot @ _unitary_super(v)
    if apply_virtual_z:
        zf = np.eye(n, dtype=complex)
        idx = qutrit_indices(d)
        zf[np.ix_(idx, idx)] = virtual_z_matrix(schedule.virtual_z)
        s_tot = _unitary_super(zf) @ s_tot
    idx = qutrit_indices(d)
    choi = np.zeros((81, 81), complex)
    for a in range(9):
        for b in range(9):
            rho = np.zeros((n, n), complex)
            rho[idx[a], idx[b]] = 1
            out = (s_tot @ rho.reshape(-1, order="F")).reshape(n, n, order="F")
            blk = out[np.ix_(idx, idx)]
            choi[a * 9:(a + 1) * 9, b * 9:(b + 1) * 9] = blk
    # choi[a*9 + c, b*9 + d] = Lambda(|a><b|)[c, d]
    return choi


def propagate(device: DeviceParams, schedule: PulseSchedule, decoherence: bool = False):
    """Qutrit-block unitary, or Choi matrix when ``decoherence`` is set."""
    if decoherence:
        if not device.has_decoherence:
            raise ValueError("device has no coherence times")
        return propagate_channel(device, schedule)
    return propagate_unitary(device, schedule)
