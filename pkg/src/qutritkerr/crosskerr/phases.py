"""Entangling-phase extraction from near-diagonal two-qutrit propagators."""
from __future__ import annotations

import numpy as np

OFFDIAG_LIMIT = 1e-2
PAIRS = ((1, 1), (1, 2), (2, 1), (2, 2))


class LeakageError(ValueError):
    """Raised when a propagator is too far from diagonal for phase extraction."""


def wrap(angle):
    """Map angles to (-pi, pi]."""
    return -(np.mod(-np.asarray(angle, dtype=float) + np.pi, 2 * np.pi) - np.pi)


def offdiagonal_mass(u: np.ndarray) -> float:
    u = np.asarray(u)
    total = np.sum(np.abs(u) ** 2)
    return float((total - np.sum(np.abs(np.diag(u)) ** 2)) / u.shape[0])


def combine_phases(theta: np.ndarray) -> np.ndarray:
    """``theta_ij + theta_00 - theta_i0 - theta_0j`` for (11, 12, 21, 22), wrapped."""
    t = np.asarray(theta, dtype=float).reshape(3, 3)
    return wrap(np.array([t[i, j] + t[0, 0] - t[i, 0] - t[0, j] for i, j in PAIRS]))


def extract_entangling_phases(u: np.ndarray, limit: float = OFFDIAG_LIMIT) -> np.ndarray:
    """Four entangling phases ``(phi_11, phi_12, phi_21, phi_22)`` of a 9x9 propagator.

    Invariant under local diagonal phases on either side. For
    ``u = exp(-i H tau)`` with diagonal ``H`` the result is ``-alpha tau``
    wrapped to (-pi, pi].
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (9, 9):
        raise ValueError("expected a 9x9 propagator")
    mass = offdiagonal_mass(u)
    if mass >= limit:
        raise LeakageError(f"off-diagonal mass {mass:.3e} exceeds {limit:.1e}")
    return combine_phases(np.angle(np.diag(u)))


def rates_from_phases(phases, tau: float) -> np.ndarray:
    """Cross-Kerr rates from phases accumulated under ``exp(-i H tau)``."""
    return -np.asarray(phases, dtype=float) / tau


def echo_symmetry_defect(u: np.ndarray) -> float:
    """Largest of |phi_11 - phi_22| and |phi_12 - phi_21| (wrapped)."""
    p = extract_entangling_phases(u)
    return float(max(abs(wrap(p[0] - p[3])), abs(wrap(p[1] - p[2]))))
