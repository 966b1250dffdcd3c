"""Cross-entropy benchmarking of two-qutrit gates with random SU(3) dressing."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from .fitting import fit_exponential
from .simulator import Circuit, Gate, haar_su3, probabilities, run, zero_state

D = 9
UNIFORM = np.full(D, 1.0 / D)


@dataclass
class XEBConfig:
    gate: Gate = field(default_factory=lambda: Gate("CZdag", (0, 1)))
    depths: Sequence[int] = (2, 5, 10, 15, 20)
    n_random: int = 30
    shots: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.n_random < 10:
            raise ValueError("n_random must be at least 10")
        if not self.depths or min(self.depths) < 0:
            raise ValueError("depths must be non-negative and nonempty")


@dataclass
class XEBDepthResult:
    depth: int
    fidelity: float
    fidelity_err: float
    speckle: float
    speckle_err: float
    ideal: np.ndarray = field(repr=False)
    counts: np.ndarray = field(repr=False)


@dataclass
class XEBResult:
    per_depth: List[XEBDepthResult]
    cycle_fidelity: float
    cycle_fidelity_err: float
    amplitude: float
    purity_fidelity: Optional[float]
    purity_fidelity_err: Optional[float]

    def to_dict(self) -> dict:
        rows = []
        for r in self.per_depth:
            rows.append({
                "depth": r.depth, "fidelity": r.fidelity, "fidelity_err": r.fidelity_err,
                "speckle": r.speckle, "speckle_err": r.speckle_err,
                "ideal": r.ideal.tolist(), "counts": r.counts.tolist(),
            })
        return {"per_depth": rows, "cycle_fidelity": self.cycle_fidelity,
                "cycle_fidelity_err": self.cycle_fidelity_err, "amplitude": self.amplitude,
                "purity_fidelity": self.purity_fidelity,
                "purity_fidelity_err": self.purity_fidelity_err}


def xeb_circuit(gate: Gate, depth: int, rng: np.random.Generator) -> Tuple[Circuit, np.ndarray]:
    """``depth`` cycles of (Haar SU(3) on each qutrit, then ``gate``) and its ideal distribution."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    ops: List[Gate] = []
    for _ in range(depth):
        ops.append(Gate("CustomUnitary", (0,), matrix=haar_su3(rng)))
        ops.append(Gate("CustomUnitary", (1,), matrix=haar_su3(rng)))
        ops.append(gate)
    circ = Circuit(2, ops)
    ideal_ops = [op for op in ops if not op.is_channel]
    psi = run(Circuit(2, ideal_ops), zero_state(2))
    return circ, probabilities(psi)


def linear_cross_entropy(p1, p2) -> float:
    return float(np.dot(np.asarray(p1, float), np.asarray(p2, float)))


def f_xeb(p_ideal, q_measured) -> float:
    """``(H(p,q) - H(p,u)) / (H(p,p) - H(p,u))``."""
    p = np.asarray(p_ideal, float)
    u = np.full(p.size, 1.0 / p.size)
    den = linear_cross_entropy(p, p) - linear_cross_entropy(p, u)
    if abs(den) < 1e-12:
        raise ValueError("ideal distribution is uniform; XEB fidelity undefined")
    return (linear_cross_entropy(p, q_measured) - linear_cross_entropy(p, u)) / den


def depth_fidelity(ideal: np.ndarray, measured: np.ndarray) -> Tuple[float, float]:
    """Least-squares slope through the origin of excess cross entropies, with its standard error."""
    x = np.einsum("ij,ij->i", ideal, ideal) - 1.0 / D
    y = np.einsum("ij,ij->i", ideal, measured) - 1.0 / D
    sxx = float(np.dot(x, x))
    if sxx < 1e-15:
        raise ValueError("all ideal distributions are uniform")
    slope = float(np.dot(x, y) / sxx)
    resid = y - slope * x
    dof = max(len(x) - 1, 1)
    err = float(np.sqrt(np.dot(resid, resid) / dof / sxx))
    return slope, err


def _gamma(samples: np.ndarray, shots: Optional[int]) -> float:
    var = np.var(samples, ddof=1)
    if shots:
        mean = np.mean(samples)
        var -= mean * (1 - mean) / shots
    return float(var * D ** 2 * (D + 1) / (D - 1))


def speckle_purity(samples, shots: Optional[int] = None) -> Tuple[float, float]:
    """Speckle purity ``Var(p) D^2 (D+1)/(D-1)`` with jackknife error.

    ``samples`` holds per-circuit probabilities of one tritstring (1-D) or
    of all tritstrings (circuits x 9), in which case the estimates are
    averaged. With ``shots`` the multinomial shot-noise variance is removed.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    n = s.shape[0]
    if n < 10:
        raise ValueError("speckle purity needs at least 10 samples")

    def estimate(block):
        return float(np.mean([_gamma(block[:, k], shots) for k in range(block.shape[1])]))

    full = estimate(s)
    jack = np.array([estimate(np.delete(s, i, axis=0)) for i in range(n)])
    err = float(np.sqrt((n - 1) / n * np.sum((jack - jack.mean()) ** 2)))
    return full, err


@dataclass
class PorterThomasResult:
    statistic: float
    pvalue: float
    passed: bool
    uniform_passed: bool
    depth: Optional[int] = None


def porter_thomas_cdf(p, dim: int = D):
    return 1.0 - np.power(1.0 - np.clip(p, 0, 1), dim - 1)


def porter_thomas_test(samples, depth: Optional[int] = None, alpha: float = 0.01,
                       uniform_tol: float = 1e-3) -> PorterThomasResult:
    """Two-sided KS test against the Porter-Thomas law, plus the uniform-limit check."""
    s = np.asarray(samples, dtype=float).reshape(-1)
    if s.size < 100:
        raise ValueError("Porter-Thomas test needs at least 100 samples")
    res = stats.kstest(s, porter_thomas_cdf)
    uniform = bool(np.max(np.abs(s - 1.0 / D)) < uniform_tol)
    return PorterThomasResult(float(res.statistic), float(res.pvalue), bool(res.pvalue > alpha),
                              uniform, depth)


def run_xeb(config: XEBConfig, backend, rng: Optional[np.random.Generator] = None) -> XEBResult:
    """Per-depth XEB fidelities, exponential cycle fidelity and speckle purities."""
    master = np.random.SeedSequence(config.seed) if rng is None else None
    per_depth = []
    for di, depth in enumerate(config.depths):
        ideal, counts = [], []
        children = (master.spawn(config.n_random) if master is not None else
                    [None] * config.n_random)
        for child in children:
            crng = np.random.default_rng(child) if child is not None else rng
            circ, p = xeb_circuit(config.gate, depth, crng)
            counts.append(backend.run(circ, config.shots, crng))
            ideal.append(p)
        ideal = np.array(ideal)
        counts = np.array(counts)
        measured = counts / config.shots
        if depth == 0:
            fid, ferr = 1.0, 0.0
        else:
            fid, ferr = depth_fidelity(ideal, measured)
        gam, gerr = speckle_purity(measured, config.shots)
        per_depth.append(XEBDepthResult(depth, fid, ferr, gam, gerr, ideal, counts))
    depths = np.array([r.depth for r in per_depth])
    fit = fit_exponential(depths, [r.fidelity for r in per_depth],
                          [r.fidelity_err for r in per_depth])
    purity_f = purity_err = None
    good = [r for r in per_depth if r.depth > 0 and r.speckle > 0]
    if len(good) >= 2:
        pf = fit_exponential([r.depth for r in good], [r.speckle for r in good],
                             [r.speckle_err for r in good])
        purity_f = float(np.sqrt(max(pf.rate, 0.0)))
        purity_err = float(pf.rate_err / (2 * purity_f)) if purity_f > 0 else None
    return XEBResult(per_depth, fit.rate, fit.rate_err, fit.amplitude, purity_f, purity_err)


def state_purity_to_speckle(purity: float) -> float:
    """Map ``Tr(rho^2)`` onto the speckle scale: 0 for ``I/D``, 1 for pure states."""
    return (D * purity - 1) / (D - 1)


__all__ = [
    "XEBConfig", "XEBResult", "f_xeb", "linear_cross_entropy", "porter_thomas_cdf",
    "porter_thomas_test", "run_xeb", "speckle_purity", "state_purity_to_speckle", "xeb_circuit",
]
