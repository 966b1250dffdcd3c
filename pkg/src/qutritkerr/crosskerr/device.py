"""Device, drive and pulse-schedule parameters for a driven transmon pair."""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

TWO_PI = 2 * np.pi
MHZ = TWO_PI * 1e6
GHZ = TWO_PI * 1e9
US = 1e-6
NS = 1e-9

_RATE_FIELDS = ("omega_c", "omega_t", "eta_c", "eta_t", "J")
_TIME_FIELDS = ("t1_01", "t1_12", "t2_01", "t2_12")


@dataclass(frozen=True)
class DeviceParams:
    """Duffing-pair parameters in rad/s; coherence times in seconds as (control, target) pairs."""

    omega_c: float
    omega_t: float
    eta_c: float
    eta_t: float
    J: float
    d_trunc: int = 4
    t1_01: Optional[Tuple[float, float]] = None
    t1_12: Optional[Tuple[float, float]] = None
    t2_01: Optional[Tuple[float, float]] = None
    t2_12: Optional[Tuple[float, float]] = None

    def __post_init__(self):
        if self.d_trunc < 3:
            raise ValueError("d_trunc must be at least 3")
        for name in _TIME_FIELDS:
            val = getattr(self, name)
            if val is not None:
                if len(val) != 2 or min(val) <= 0:
                    raise ValueError(f"{name} needs two positive times")
                object.__setattr__(self, name, tuple(float(v) for v in val))
        if abs(self.J) > 0.1 * abs(self.omega_c - self.omega_t):
            warnings.warn("coupling is not small compared with the qubit detuning; "
                          "perturbative rates may be inaccurate")

    @property
    def has_decoherence(self) -> bool:
        return self.t1_01 is not None or self.t2_01 is not None

    @property
    def eta(self) -> float:
        """Mean anharmonicity magnitude used by the equal-anharmonicity formulas."""
        return -(self.eta_c + self.eta_t) / 2

    def to_hz_dict(self) -> dict:
        out = {"d_trunc": self.d_trunc}
        for name in _RATE_FIELDS:
            out[name] = getattr(self, name) / TWO_PI
        for name in _TIME_FIELDS:
            val = getattr(self, name)
            out[name] = None if val is None else list(val)
        return out

    @classmethod
    def from_hz_dict(cls, data: dict) -> "DeviceParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown device fields: {sorted(unknown)}")
        missing = [k for k in _RATE_FIELDS if k not in data]
        if missing:
            raise ValueError(f"missing device fields: {missing}")
        kwargs = {k: TWO_PI * float(data[k]) for k in _RATE_FIELDS}
        kwargs["d_trunc"] = int(data.get("d_trunc", 4))
        for name in _TIME_FIELDS:
            if data.get(name) is not None:
                kwargs[name] = tuple(data[name])
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_hz_dict(), indent=2)

    @classmethod
    def from_json(cls, path_or_text: Union[str, Path]) -> "DeviceParams":
        text = str(path_or_text)
        p = Path(text)
        if not text.lstrip().startswith("{") and p.exists():
            text = p.read_text()
        return cls.from_hz_dict(json.loads(text))

    def without_decoherence(self) -> "DeviceParams":
        return replace(self, t1_01=None, t1_12=None, t2_01=None, t2_12=None)


@dataclass(frozen=True)
class DriveParams:
    """Common drive frequency, per-transmon amplitudes (rad/s) and relative phase."""

    omega_d: float
    Omega_c: float
    Omega_t: float
    phi: float = 0.0

    def __post_init__(self):
        if self.Omega_c < 0 or self.Omega_t < 0:
            raise ValueError("drive amplitudes must be non-negative")

    def scaled(self, factor: float) -> "DriveParams":
        return replace(self, Omega_c=self.Omega_c * factor, Omega_t=self.Omega_t * factor)


@dataclass(frozen=True)
class DriveSegment:
    drive: DriveParams
    total: float
    ramp: float = 20 * NS

    def __post_init__(self):
        if self.total < 0 or self.ramp < 0:
            raise ValueError("durations must be non-negative")
        if self.ramp > self.total / 2 + 1e-18:
            raise ValueError("ramp must not exceed half the segment")


@dataclass(frozen=True)
class Echo:
    """Ideal X12 pi pulse on both transmons."""


@dataclass
class PulseSchedule:
    segments: List[Union[DriveSegment, Echo]]
    virtual_z: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    @property
    def duration(self) -> float:
        return float(sum(s.total for s in self.segments if isinstance(s, DriveSegment)))

    @property
    def is_gate_form(self) -> bool:
        drives = sum(isinstance(s, DriveSegment) for s in self.segments)
        echoes = sum(isinstance(s, Echo) for s in self.segments)
        return drives == 2 and echoes == 2

    def to_dict(self) -> dict:
        segs = []
        for s in self.segments:
            if isinstance(s, Echo):
                segs.append({"echo": "X12_pi"})
            else:
                d = s.drive
                segs.append({"drive": {"omega_d_hz": d.omega_d / TWO_PI, "Omega_c_hz": d.Omega_c / TWO_PI,
                                       "Omega_t_hz": d.Omega_t / TWO_PI, "phi": d.phi},
                             "total_s": s.total, "ramp_s": s.ramp})
        return {"segments": segs, "virtual_z": list(self.virtual_z)}

    @classmethod
    def from_dict(cls, data: dict) -> "PulseSchedule":
        segs: List[Union[DriveSegment, Echo]] = []
        for s in data["segments"]:
            if "echo" in s:
                segs.append(Echo())
            else:
                d = s["drive"]
                drive = DriveParams(TWO_PI * d["omega_d_hz"], TWO_PI * d["Omega_c_hz"],
                                    TWO_PI * d["Omega_t_hz"], d.get("phi", 0.0))
                segs.append(DriveSegment(drive, s["total_s"], s.get("ramp_s", 20 * NS)))
        return cls(segs, tuple(data.get("virtual_z", (0.0, 0.0, 0.0, 0.0))))


def gate_schedule(drive: DriveParams, tau: float, ramp: float = 20 * NS,
                  virtual_z=(0.0, 0.0, 0.0, 0.0)) -> PulseSchedule:
    """Two echoed drive rounds: drive, echo, drive, echo."""
    seg = DriveSegment(drive, tau, ramp)
    return PulseSchedule([seg, Echo(), seg, Echo()], tuple(virtual_z))


def _pair(a, b):
    return (a * US, b * US)


PRESETS = {
    "cz-pair": DeviceParams(
        omega_c=5.436 * GHZ, omega_t=5.327 * GHZ, eta_c=-260.20 * MHZ, eta_t=-262.94 * MHZ,
        J=2.7 * MHZ, t1_01=_pair(125, 78), t1_12=_pair(63, 47),
        t2_01=_pair(190, 138), t2_12=_pair(61, 45)),
    # coupling for this pair is not reported; the other pair's estimate is reused
    "czdag-pair": DeviceParams(
        omega_c=5.362 * GHZ, omega_t=5.523 * GHZ, eta_c=-275 * MHZ, eta_t=-271.35 * MHZ,
        J=2.7 * MHZ, t1_01=_pair(45, 58), t1_12=_pair(33, 28),
        t2_01=_pair(63, 84), t2_12=_pair(28, 30)),
}


def preset(name: str) -> DeviceParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def midpoint_drive_frequency(device: DeviceParams) -> float:
    """Drive frequency halfway between the two 1->2 transitions."""
    f12_c = device.omega_c + device.eta_c
    f12_t = device.omega_t + device.eta_t
    return (f12_c + f12_t) / 2
