"""Rotating-frame Hamiltonian and collapse operators of a driven Duffing pair."""
from __future__ import annotations

import functools
import warnings
from typing import List, Tuple

import numpy as np

from .device import DeviceParams, DriveParams


@functools.lru_cache(maxsize=None)
def lowering(d: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)
    a.flags.writeable = False
    return a


@functools.lru_cache(maxsize=None)
def pair_lowering(d: int) -> Tuple[np.ndarray, np.ndarray]:
    a = lowering(d)
    eye = np.eye(d)
    return np.kron(a, eye), np.kron(eye, a)


def static_hamiltonian(device: DeviceParams, omega_d: float) -> np.ndarray:
    """Drive-free part: detuned Duffing oscillators plus exchange coupling."""
    d = device.d_trunc
    if d < 3:
        raise ValueError("d_trunc must be at least 3")
    ac, at = pair_lowering(d)
    nc, nt = ac.conj().T @ ac, at.conj().T @ at
    h = ((device.omega_c - omega_d) * nc + (device.omega_t - omega_d) * nt
         + device.eta_c / 2 * (nc @ nc - nc) + device.eta_t / 2 * (nt @ nt - nt)
         + device.J * (ac.conj().T @ at + ac @ at.conj().T))
    return h


def drive_hamiltonian(device: DeviceParams, drive: DriveParams) -> np.ndarray:
    """``Omega_c (a_c + a_c^dag) + Omega_t (e^{i phi} a_t + h.c.)``."""
    ac, at = pair_lowering(device.d_trunc)
    hc = drive.Omega_c * (ac + ac.conj().T)
    ph = np.exp(1j * drive.phi)
    ht = drive.Omega_t * (ph * at + np.conj(ph) * at.conj().T)
    return hc + ht


def rwa_hamiltonian(device: DeviceParams, drive: DriveParams) -> np.ndarray:
    h = static_hamiltonian(device, drive.omega_d) + drive_hamiltonian(device, drive)
    return (h + h.conj().T) / 2


def _pure_dephasing(t1_01: float, t1_12: float, t2_01: float, t2_12: float) -> Tuple[float, float]:
    """Rates of ``sqrt(g1)|1><1|`` and ``sqrt(g2)|2><2|`` matching both coherence times."""
    g01 = 1 / t2_01 - 1 / (2 * t1_01)
    g12 = 1 / t2_12 - (1 / t1_01 + 1 / t1_12) / 2
    g1 = 2 * g01
    g2 = 2 * g12 - g1
    if g1 < 0 or g2 < 0:
        warnings.warn("coherence times exceed the relaxation limit; clipping pure dephasing at 0")
    return max(g1, 0.0), max(g2, 0.0)


def collapse_operators(device: DeviceParams) -> List[np.ndarray]:
    """Relaxation on 0-1 and 1-2 plus level-resolved pure dephasing, per transmon."""
    d = device.d_trunc
    eye = np.eye(d)
    ops = []
    for q in range(2):
        local = []
        if device.t1_01 is not None:
            m = np.zeros((d, d), complex)
            m[0, 1] = np.sqrt(1 / device.t1_01[q])
            local.append(m)
        if device.t1_12 is not None:
            m = np.zeros((d, d), complex)
            m[1, 2] = np.sqrt(1 / device.t1_12[q])
            local.append(m)
        if None not in (device.t1_01, device.t1_12, device.t2_01, device.t2_12):
            g1, g2 = _pure_dephasing(device.t1_01[q], device.t1_12[q],
                                     device.t2_01[q], device.t2_12[q])
            for level, g in ((1, g1), (2, g2)):
                if g > 0:
                    m = np.zeros((d, d), complex)
                    m[level, level] = np.sqrt(g)
                    local.append(m)
        for m in local:
            ops.append(np.kron(m, eye) if q == 0 else np.kron(eye, m))
    return ops


def qutrit_indices(d: int) -> np.ndarray:
    """Positions of the nine two-qutrit basis states inside the truncated space."""
    i, j = np.divmod(np.arange(9), 3)
    return i * d + j


def dressed_energies(h: np.ndarray, d: int, eig=None) -> np.ndarray:
    """Eigenvalues assigned to bare states ``|ij>``, ``i, j < 3``, by maximal overlap."""
    w, v = np.linalg.eigh(h) if eig is None else eig
    overlap = np.abs(v) ** 2
    out = np.empty((3, 3))
    taken = set()
    for i in range(3):
        for j in range(3):
            row = overlap[i * d + j].copy()
            row[list(taken)] = -1
            k = int(np.argmax(row))
            taken.add(k)
            out[i, j] = w[k]
    return out


def alpha_from_energies(e: np.ndarray) -> np.ndarray:
    """``alpha_ij = E_ij + E_00 - E_0j - E_i0`` for ``i, j`` in {1, 2}."""
    return np.array([[e[i, j] + e[0, 0] - e[0, j] - e[i, 0] for j in (1, 2)] for i in (1, 2)])
