"""Simulated Ramsey-type measurement of cross-Kerr rates via state tomography."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from ..simulator import Circuit, Gate, SimulatorBackend
from ..tomography import state_tomography
from .device import NS, DeviceParams, DriveParams, DriveSegment, PulseSchedule
from .perturbative import AlphaRates, PerturbativeSingularity, alpha_total
from .phases import PAIRS, extract_entangling_phases, wrap
from .propagate import propagate_unitary

MAX_STEP_PHASE = 0.9 * np.pi  # observed wrapped steps this large are ambiguous


class PhaseUnwrapError(ValueError):
    """Raised when consecutive durations are too far apart to unwrap phases."""


@dataclass
class RamseyResult:
    rates: AlphaRates
    stderr: np.ndarray
    intercepts: np.ndarray
    durations: np.ndarray
    phases: np.ndarray  # unwrapped, shape (n_durations, 4)

    def to_dict(self) -> dict:
        return {"rates_rad_s": self.rates.as_array().tolist(), "stderr_rad_s": self.stderr.tolist(),
                "intercepts": self.intercepts.tolist(), "durations_s": self.durations.tolist(),
                "phases": self.phases.tolist()}


def _polar(u: np.ndarray) -> np.ndarray:
    """Closest unitary; drops the small norm loss from leakage."""
    w, _, vh = np.linalg.svd(u)
    return w @ vh


def phases_from_state(rho: np.ndarray) -> np.ndarray:
    """Entangling phases of ``sum_ij e^{i theta_ij}|ij>`` read from the ``|ij><00|`` coherences."""
    theta = np.angle(rho[:, 0])
    t = theta.reshape(3, 3)
    return wrap(np.array([t[i, j] + t[0, 0] - t[i, 0] - t[0, j] for i, j in PAIRS]))


def _linear_fit(t: np.ndarray, y: np.ndarray):
    """Slope, intercept and slope standard error of an ordinary least-squares line."""
    a = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    n = len(t)
    resid = y - a @ coef
    dof = max(n - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(a.T @ a)
    return coef[0], coef[1], float(np.sqrt(cov[0, 0]))


def _unwrap(phases: np.ndarray) -> np.ndarray:
    steps = wrap(np.diff(phases, axis=0))
    if steps.size and np.max(np.abs(steps)) >= MAX_STEP_PHASE:
        raise PhaseUnwrapError("phase step between durations is ambiguous; use denser durations")
    return np.concatenate([phases[:1], phases[0] + np.cumsum(steps, axis=0)], axis=0)


def ramsey_protocol_sim(device: Optional[DeviceParams], drive: Optional[DriveParams],
                        durations: Sequence[float], shots: int,
                        rng: Optional[np.random.Generator] = None, ramp: float = 20 * NS,
                        unitary_fn: Optional[Callable[[float], np.ndarray]] = None) -> RamseyResult:
    """Fit cross-Kerr rates from tomography after a Hadamard-drive sequence.

    Each point prepares ``H3 (x) H3 |00>``, applies a single flat-top drive of
    total length ``t`` (no echo) and reconstructs the two-qutrit state. The
    entangling phases are unwrapped across durations and fitted to lines; ramp
    effects land in the intercepts. Rates follow ``phi = -alpha t``.

    Args:
        device, drive: physical model; ignored when ``unitary_fn`` is given.
        durations: strictly increasing drive lengths in seconds, at least three.
        shots: shots per tomography setting.
        unitary_fn: optional map from duration to a 9x9 qutrit-block unitary.

    Raises:
        PhaseUnwrapError: if a phase advance between neighbouring durations
            could exceed half a turn.
    """
    t = np.asarray(durations, dtype=float)
    if t.ndim != 1 or len(t) < 3 or np.any(np.diff(t) <= 0):
        raise ValueError("durations must be strictly increasing with at least three points")
    if unitary_fn is None:
        if device is None or drive is None:
            raise ValueError("device and drive are required without unitary_fn")
        if np.any(t < 2 * ramp):
            raise ValueError("durations must cover both ramps")
        try:
            pred = alpha_total(device, drive).as_array()
        except PerturbativeSingularity:
            pred = None
        if pred is not None and np.max(np.abs(pred)) * np.max(np.diff(t)) >= np.pi:
            raise PhaseUnwrapError("predicted phase advance per step reaches pi; use denser durations")

        def unitary_fn(tau):
            sched = PulseSchedule([DriveSegment(drive, float(tau), ramp)])
            return propagate_unitary(device, sched, apply_virtual_z=False)

    rng = np.random.default_rng() if rng is None else rng
    backend = SimulatorBackend()
    h = [Gate("H3", (0,)), Gate("H3", (1,))]
    raw = []
    for tau in t:
        u = _polar(np.asarray(unitary_fn(tau)))
        prep = Circuit(2, h + [Gate("CustomUnitary", (0, 1), matrix=u)])
        rho = state_tomography(prep, backend, shots, rng).estimate
        raw.append(phases_from_state(rho))
    phases = _unwrap(np.array(raw))
    fits = [_linear_fit(t, phases[:, k]) for k in range(4)]
    slopes = np.array([f[0] for f in fits])
    return RamseyResult(AlphaRates.from_array(-slopes), np.array([f[2] for f in fits]),
                        np.array([f[1] for f in fits]), t, phases)


def alpha_from_propagation(device: DeviceParams, drive: DriveParams, durations: Sequence[float],
                           ramp: float = 20 * NS) -> RamseyResult:
    """Noiseless rates from the propagator's entangling phases across single drive segments."""
    t = np.asarray(durations, dtype=float)
    if t.ndim != 1 or len(t) < 3 or np.any(np.diff(t) <= 0):
        raise ValueError("durations must be strictly increasing with at least three points")
    raw = []
    for tau in t:
        u = propagate_unitary(device, PulseSchedule([DriveSegment(drive, float(tau), ramp)]),
                              apply_virtual_z=False)
        raw.append(extract_entangling_phases(u))
    phases = _unwrap(np.array(raw))
    fits = [_linear_fit(t, phases[:, k]) for k in range(4)]
    return RamseyResult(AlphaRates.from_array([-f[0] for f in fits]), np.array([f[2] for f in fits]),
                        np.array([f[1] for f in fits]), t, phases)
