"""Cycle benchmarking of two-qutrit gate cycles with Weyl twirling."""
from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import WeylLabel, conjugate_label, is_clifford, weyl_character, weyl_labels, weyl_matrix
from .fitting import fit_exponential
from .simulator import Circuit, Gate, decompose_su3

D = 9
SUBSET_CHANNELS = 53
SUBSET_DEPTHS = (0, 3, 6, 15)


def all_channels(n: int = 2) -> List[WeylLabel]:
    return [lab for lab in weyl_labels(n) if not lab.is_identity]


def random_channel_subset(rng: np.random.Generator, k: int = SUBSET_CHANNELS) -> List[WeylLabel]:
    chans = all_channels()
    idx = np.sort(rng.choice(len(chans), size=k, replace=False))
    return [chans[i] for i in idx]


@dataclass
class CBConfig:
    cycle: Circuit
    depths: Sequence[int] = (0, 4, 8)
    channels: Optional[Sequence[WeylLabel]] = None
    n_randomizations: int = 30
    shots: int = 2048
    seed: int = 0
    aggregation: str = "mean"

    def __post_init__(self):
        if self.channels is None:
            self.channels = all_channels(self.cycle.n_qutrits)
        if not self.depths:
            raise ValueError("depths must be nonempty")
        if min(self.depths) < 0:
            raise ValueError("depths must be non-negative")
        if not self.channels:
            raise ValueError("channels must be nonempty")
        if any(c.is_identity for c in self.channels):
            raise ValueError("identity is not a CB channel")
        if self.aggregation not in ("mean", "extrapolate"):
            raise ValueError("aggregation must be 'mean' or 'extrapolate'")


@dataclass
class DecayRecord:
    channel: WeylLabel
    amplitude: float
    decay: float
    stderr: float
    means: Dict[int, complex] = field(default_factory=dict)


@dataclass
class CBResult:
    records: List[DecayRecord]
    composite_fidelity: float
    composite_stderr: float
    raw: Dict[Tuple[int, int], np.ndarray] = field(repr=False, default_factory=dict)
    failed: List[WeylLabel] = field(default_factory=list)
    unitarity: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "composite_fidelity": self.composite_fidelity,
            "composite_stderr": self.composite_stderr,
            "unitarity": self.unitarity,
            "records": [{"channel": str(r.channel), "amplitude": r.amplitude, "decay": r.decay,
                         "stderr": r.stderr} for r in self.records],
            "failed": [str(c) for c in self.failed],
        }


def isolate_gate_error(f_dressed: float, f_ref: float, dim: int = D) -> float:
    """Gate process fidelity from dressed and reference cycle fidelities."""
    if f_ref == 0:
        raise ValueError("reference fidelity must be nonzero")
    return 1 - (dim - 1) / dim * (1 - f_dressed / f_ref)


# ------------------------------------------------------------ compilation

@functools.lru_cache(maxsize=None)
def _single_weyl_gates(x: int, z: int) -> Tuple[Gate, ...]:
    return tuple(decompose_su3(weyl_matrix(WeylLabel((x,), (z,)))))


def weyl_layer(label: WeylLabel) -> List[Gate]:
    """Native gates realizing a Weyl operator up to global phase."""
    ops = []
    for q in range(label.n):
        for g in _single_weyl_gates(label.x[q], label.z[q]):
            ops.append(Gate(g.kind, (q,), g.params))
    return ops


@functools.lru_cache(maxsize=None)
def _eigenbasis(x: int, z: int) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvector matrix of a single-qutrit Weyl operator."""
    w = weyl_matrix(WeylLabel((x,), (z,)))
    if x == 0 and z == 0:
        return np.ones(3, complex), np.eye(3, dtype=complex)
    vals, vecs = np.linalg.eig(w)
    # index 0 is the eigenvector closest to +1; spectrum is non-degenerate
    order = np.argsort(np.abs(vals - 1))
    vecs, _ = np.linalg.qr(vecs[:, order])
    vals = np.array([np.vdot(vecs[:, k], w @ vecs[:, k]) for k in range(3)])
    return vals, vecs


@functools.lru_cache(maxsize=None)
def _basis_change_gates(x: int, z: int, inverse: bool) -> Tuple[Gate, ...]:
    _, v = _eigenbasis(x, z)
    return tuple(decompose_su3(v.conj().T if inverse else v))


def _local_gates(label: WeylLabel, inverse: bool) -> List[Gate]:
    ops = []
    for q in range(label.n):
        for g in _basis_change_gates(label.x[q], label.z[q], inverse):
            ops.append(Gate(g.kind, (q,), g.params))
    return ops


def _outcome_eigenvalues(label: WeylLabel) -> np.ndarray:
    vals = np.ones(1, complex)
    for q in range(label.n):
        vals = np.kron(vals, _eigenbasis(label.x[q], label.z[q])[0])
    return vals


def _check_clifford(cycle: Circuit) -> np.ndarray:
    u = cycle.unitary(skip_channels=True)
    if is_clifford(u) is None:
        raise ValueError("cycle is not Clifford")
    return u


@dataclass
class CBCircuit:
    circuit: Circuit
    weight: complex
    final_label: WeylLabel
    final_phase: complex
    prep_eigenvalue: complex

    def __iter__(self):
        return iter((self.circuit, self.weight))


def cb_circuit(cycle: Circuit, m: int, u0: WeylLabel, rng: np.random.Generator,
               cycle_unitary: Optional[np.ndarray] = None) -> CBCircuit:
    """Prep eigenstate of ``u0``, then ``W_0 C W_1 ... C W_m``, then rotate to the ``U_m`` eigenbasis.

    ``weight`` is the accumulated ``prod_j chi*_{U_j}(W_j)``; the final
    Weyl observable is ``final_phase * weyl(final_label)``.
    """
    if m < 0:
        raise ValueError("depth must be non-negative")
    u_c = _check_clifford(cycle) if cycle_unitary is None else cycle_unitary
    n = cycle.n_qutrits
    ops: List[Gate] = list(_local_gates(u0, inverse=False))
    label, phase = u0, 1.0 + 0j
    weight = 1.0 + 0j
    for j in range(m + 1):
        if j > 0:
            ops.extend(cycle.ops)
            label, ph = conjugate_label(u_c, label)
            phase *= ph
        x = tuple(int(v) for v in rng.integers(0, 3, size=n))
        z = tuple(int(v) for v in rng.integers(0, 3, size=n))
        w = WeylLabel(x, z)
        weight *= np.conj(weyl_character(label, w))
        ops.extend(weyl_layer(w))
    ops.extend(_local_gates(label, inverse=True))
    prep_val = _outcome_eigenvalues(u0)[0]
    return CBCircuit(Circuit(n, ops), complex(weight), label, complex(phase), complex(prep_val))


def weighted_estimate(counts: np.ndarray, c: CBCircuit) -> complex:
    """Single-circuit estimate normalized so the ideal value is 1."""
    freqs = counts / counts.sum()
    obs = np.dot(np.conj(_outcome_eigenvalues(c.final_label)), freqs) * np.conj(c.final_phase)
    return complex(obs * c.weight * c.prep_eigenvalue)


def _aggregate(decays: np.ndarray, errs: np.ndarray, mode: str, n_total: int) -> Tuple[float, float]:
    k = len(decays)
    if mode == "mean":
        f = (1 + decays.sum()) / (k + 1)
        err = np.sqrt(np.sum(errs ** 2)) / (k + 1)
    else:
        w = n_total / k
        f = (1 + w * decays.sum()) / (1 + n_total)
        err = w * np.sqrt(np.sum(errs ** 2)) / (1 + n_total)
    return float(f), float(err)


def run_cb(config: CBConfig, backend, rng: Optional[np.random.Generator] = None) -> CBResult:
    """Per-channel decays and the composite Weyl fidelity."""
    u_c = _check_clifford(config.cycle)
    master = np.random.SeedSequence(config.seed)
    raw: Dict[Tuple[int, int], np.ndarray] = {}
    records, failed = [], []
    for u0 in config.channels:
        per_depth = {}
        for depth in config.depths:
            vals = []
            for child in master.spawn(config.n_randomizations):
                crng = np.random.default_rng(child) if rng is None else rng
                c = cb_circuit(config.cycle, depth, u0, crng, u_c)
                counts = backend.run(c.circuit, config.shots, crng)
                vals.append(weighted_estimate(counts, c))
            vals = np.array(vals)
            raw[(u0.index, depth)] = vals
            per_depth[depth] = vals
        depths = np.array(sorted(per_depth))
        means = np.array([per_depth[m].real.mean() for m in depths])
        sems = np.array([per_depth[m].real.std(ddof=1) / np.sqrt(len(per_depth[m]))
                         for m in depths])
        try:
            fit = fit_exponential(depths, means, sems)
        except (RuntimeError, ValueError) as exc:
            warnings.warn(f"CB fit failed for channel {u0}: {exc}")
            failed.append(u0)
            continue
        records.append(DecayRecord(u0, fit.amplitude, fit.rate, fit.rate_err,
                                   {int(m): complex(per_depth[m].mean()) for m in depths}))
    decays = np.array([r.decay for r in records])
    errs = np.array([r.stderr for r in records])
    if len(records) == 0:
        raise RuntimeError("every channel fit failed")
    f, ferr = _aggregate(decays, errs, config.aggregation, D * D - 1)
    result = CBResult(records, f, ferr, raw, failed)
    try:
        result.unitarity = unitarity_from_cb_variance(raw, config.depths, config.shots)
    except ValueError:
        result.unitarity = None
    return result


def unitarity_from_cb_variance(raw: Dict[Tuple[int, int], np.ndarray], depths: Sequence[int],
                               shots: Optional[int] = None) -> float:
    """Unitarity from the slowest decay of the per-channel second moments.

    ``raw[(channel, depth)]`` holds per-circuit weighted estimates. For
    traceless observables the twirled mean vanishes, so the variance over
    random Weyl layers is the mean of ``|mu|^2``; the shot-noise bias of
    ``|mu_hat|^2`` is removed when ``shots`` is given.
    """
    depths = sorted(set(depths))
    channels = sorted({k[0] for k in raw})
    rates = []
    nonpositive = 0
    total = 0
    for ch in channels:
        ys = []
        for m in depths:
            v = np.abs(raw[(ch, m)]) ** 2
            if shots:
                v = (shots * v - 1) / (shots - 1)
            ys.append(v.mean())
        ys = np.array(ys)
        total += len(ys)
        nonpositive += int(np.sum(ys <= 0))
        if np.sum(ys > 0) >= 2:
            ok = ys > 0
            slope = np.polyfit(np.array(depths, float)[ok], np.log(ys[ok]), 1)[0]
            rates.append(np.exp(slope))
    if nonpositive * 2 >= total or not rates:
        raise ValueError("too many non-positive variance estimates")
    return float(np.sqrt(min(max(rates), 1.0 + 1e-12)))


__all__ = [
    "CBConfig", "CBResult", "DecayRecord", "all_channels", "cb_circuit", "isolate_gate_error",
    "random_channel_subset", "run_cb", "unitarity_from_cb_variance", "weighted_estimate",
]
