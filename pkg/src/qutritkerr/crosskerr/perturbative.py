"""Closed-form second- and third-order cross-Kerr rates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .device import DeviceParams, DriveParams, TWO_PI

POLE_GUARD = TWO_PI * 1e3


class PerturbativeSingularity(ValueError):
    """Raised when a detuning sits on a pole of the perturbative expressions."""


@dataclass(frozen=True)
class AlphaRates:
    a11: float
    a12: float
    a21: float
    a22: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a11, self.a12, self.a21, self.a22])

    @classmethod
    def from_array(cls, arr) -> "AlphaRates":
        a = np.asarray(arr, dtype=float).reshape(-1)
        return cls(*map(float, a))

    def __add__(self, other: "AlphaRates") -> "AlphaRates":
        return AlphaRates.from_array(self.as_array() + other.as_array())

    def __mul__(self, k: float) -> "AlphaRates":
        return AlphaRates.from_array(self.as_array() * k)

    __rmul__ = __mul__

    @property
    def s1(self) -> float:
        return self.a11 + self.a22

    @property
    def s2(self) -> float:
        return self.a12 + self.a21


def _guard(name: str, value: float):
    if abs(value) < POLE_GUARD:
        raise PerturbativeSingularity(f"{name} is within the pole guard ({value:.3e} rad/s)")


def alpha_static(device: DeviceParams) -> AlphaRates:
    """Second-order rates from the exchange coupling alone (equal anharmonicity)."""
    eta = device.eta
    dlt = device.omega_c - device.omega_t
    j2 = device.J ** 2
    if j2 == 0:
        return AlphaRates(0.0, 0.0, 0.0, 0.0)
    for name, val in (("Delta", dlt), ("eta-Delta", eta - dlt), ("eta+Delta", eta + dlt),
                      ("2eta-Delta", 2 * eta - dlt), ("2eta+Delta", 2 * eta + dlt)):
        _guard(name, val)
    a11 = 4 * eta * j2 / ((eta - dlt) * (eta + dlt))
    a21 = 2 * eta * j2 * (5 * eta - 4 * dlt) / (dlt * (eta - dlt) * (2 * eta - dlt))
    a12 = -2 * eta * j2 * (5 * eta + 4 * dlt) / (dlt * (eta + dlt) * (2 * eta + dlt))
    a22 = 16 * eta * j2 / ((eta + dlt) * (eta - dlt))
    return AlphaRates(a11, a12, a21, a22)


def alpha_driven(device: DeviceParams, drive: DriveParams) -> AlphaRates:
    """Third-order rates linear in ``Omega_c Omega_t J cos(phi)``."""
    eta = device.eta
    dc = device.omega_c - drive.omega_d
    dt = device.omega_t - drive.omega_d
    for name, val in (("Delta_C", dc), ("Delta_T", dt), ("eta-Delta_C", eta - dc),
                      ("eta-Delta_T", eta - dt), ("2eta-Delta_C", 2 * eta - dc),
                      ("2eta-Delta_T", 2 * eta - dt)):
        _guard(name, val)
    a11 = (8 * np.cos(drive.phi) * eta ** 2 * drive.Omega_c * drive.Omega_t * device.J
           / (dc * dt * (eta - dc) * (eta - dt)))
    r12 = (eta - 2 * dt) / (2 * eta - dt)
    r21 = (eta - 2 * dc) / (2 * eta - dc)
    return AlphaRates(a11, a11 * r12, a11 * r21, a11 * r12 * r21)


def alpha_total(device: DeviceParams, drive: DriveParams) -> AlphaRates:
    return alpha_static(device) + alpha_driven(device, drive)
