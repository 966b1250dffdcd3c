"""Two-qutrit gate synthesis with alternating local SU(3) layers and a fixed entangler."""
from __future__ import annotations

import csv
import functools
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .simulator.gates import _LAMBDAS, native_gate_matrix
from .simulator.sampling import haar_su9, random_clifford2

DIM = 9
SU9_DIM = DIM * DIM - 1
PARAMS_PER_LAYER = 16
DEFAULT_TOL = 1e-6
DEFAULT_RESTARTS = 50
MAX_ITER = 3000
DEGENERATE = 1e-9
ENTANGLERS = ("CZ", "CZdag", "CSUM", "Cinc", "Cex")


@dataclass
class Ansatz:
    """``L_m G L_{m-1} ... G L_0`` with ``L_k = SU3(theta) (x) SU3(theta')``."""

    depth: int
    two_qutrit_gate: str = "CZ"
    params: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if self.two_qutrit_gate not in ENTANGLERS:
            raise ValueError(f"two_qutrit_gate must be one of {ENTANGLERS}")
        if self.params is None:
            self.params = np.zeros(self.n_params)
        self.params = np.asarray(self.params, dtype=float).ravel()
        if self.params.size != self.n_params:
            raise ValueError(f"expected {self.n_params} parameters, got {self.params.size}")

    @property
    def n_params(self) -> int:
        return PARAMS_PER_LAYER * (self.depth + 1)

    @property
    def gate_matrix(self) -> np.ndarray:
        return native_gate_matrix(self.two_qutrit_gate)


def _su3_batch(theta: np.ndarray):
    """Unitaries, eigenvalues and eigenvectors of ``exp(-i sum theta_k lambda_k)``, batched."""
    h = np.einsum("nk,kij->nij", theta, _LAMBDAS)
    w, v = np.linalg.eigh(h)
    u = (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, 1, 2))
    return u, w, v


def _local_layers(params: np.ndarray, depth: int):
    theta = np.asarray(params, dtype=float).reshape(depth + 1, 2, 8).reshape(-1, 8)
    u, w, v = _su3_batch(theta)
    return u.reshape(depth + 1, 2, 3, 3), w.reshape(depth + 1, 2, 3), v.reshape(depth + 1, 2, 3, 3)


def ansatz_unitary(ansatz: Ansatz) -> np.ndarray:
    a, _, _ = _local_layers(ansatz.params, ansatz.depth)
    g = ansatz.gate_matrix
    u = np.kron(a[0, 0], a[0, 1])
    for k in range(1, ansatz.depth + 1):
        u = np.kron(a[k, 0], a[k, 1]) @ g @ u
    return u


def infidelity(v: np.ndarray, u: np.ndarray) -> float:
    """``1 - |Tr(V^dag U)|^2 / d^2``; blind to global phase."""
    d = u.shape[0]
    return float(1 - abs(np.trace(v.conj().T @ u)) ** 2 / d ** 2)


def _expm_derivative_kernel(w: np.ndarray) -> np.ndarray:
    """Divided differences of ``exp(-i x)`` on eigenvalue pairs."""
    e = np.exp(-1j * w)
    dw = w[..., :, None] - w[..., None, :]
    de = e[..., :, None] - e[..., None, :]
    mean = (w[..., :, None] + w[..., None, :]) / 2
    close = np.abs(dw) < DEGENERATE
    safe = np.where(close, 1.0, dw)
    return np.where(close, -1j * np.exp(-1j * mean), de / safe)


def infidelity_and_grad(params: np.ndarray, depth: int, gate: np.ndarray, target: np.ndarray):
    """Infidelity of the ansatz and its exact gradient (Daleckii-Krein for each SU(3) block)."""
    a, w, v = _local_layers(params, depth)
    n = depth + 1
    layers = [np.kron(a[k, 0], a[k, 1]) for k in range(n)]
    # before[k] acts before layer k; after[k] acts after it
    before = [np.eye(DIM, dtype=complex)]
    for k in range(1, n):
        before.append(gate @ layers[k - 1] @ before[k - 1])
    after = [np.eye(DIM, dtype=complex)] * n
    for k in range(n - 2, -1, -1):
        after[k] = after[k + 1] @ layers[k + 1] @ gate
    vmat = layers[-1] @ before[-1]
    udag = target.conj().T
    g = np.trace(udag @ vmat)
    m = np.array([before[k] @ udag @ after[k] for k in range(n)]).reshape(n, 3, 3, 3, 3)
    # tr(M (X (x) Y)) = sum M[a,b,c,d] X[c,a] Y[d,b]
    na = np.einsum("kabcd,kdb->kca", m, a[:, 1])
    nb = np.einsum("kabcd,kca->kdb", m, a[:, 0])
    nmat = np.stack([na, nb], axis=1)
    wmat = np.swapaxes(v, -1, -2) @ nmat @ v.conj()
    kern = _expm_derivative_kernel(w)
    kj = np.einsum("kqpa,jpr,kqrb->kqjab", v.conj(), _LAMBDAS, v)
    dg = np.einsum("kqab,kqab,kqjab->kqj", wmat, kern, kj)
    f = 1 - abs(g) ** 2 / DIM ** 2
    grad = -2 * np.real(np.conj(g) * dg) / DIM ** 2
    return float(f), grad.ravel()


@dataclass
class SynthesisResult:
    best_params: np.ndarray
    achieved_infidelity: float
    restarts_used: int
    converged: bool
    depth: int
    gate: str

    def to_dict(self) -> dict:
        return {"depth": self.depth, "gate": self.gate, "achieved_infidelity": self.achieved_infidelity,
                "restarts_used": self.restarts_used, "converged": self.converged,
                "best_params": self.best_params.tolist()}


def synthesize(target: np.ndarray, gate: str = "CZ", depth: int = 1, restarts: int = DEFAULT_RESTARTS,
               tol: float = DEFAULT_TOL, rng: Optional[np.random.Generator] = None,
               initial: Optional[Sequence[np.ndarray]] = None, max_iter: int = MAX_ITER) -> SynthesisResult:
    """Multi-start BFGS on the ansatz infidelity; stops at the first start below ``tol``.

    ``initial`` supplies seed vectors tried before the uniform random starts
    in ``[-pi, pi]``; each counts as one restart.
    """
    target = np.asarray(target, dtype=complex)
    if target.shape != (DIM, DIM):
        raise ValueError("target must be a 9x9 unitary")
    rng = np.random.default_rng() if rng is None else rng
    ans = Ansatz(depth, gate)
    gmat = ans.gate_matrix
    seeds = [np.asarray(s, dtype=float) for s in (initial or [])]
    best_x, best_f = None, np.inf
    used = 0
    for r in range(max(restarts, len(seeds))):
        x0 = seeds[r] if r < len(seeds) else rng.uniform(-np.pi, np.pi, ans.n_params)
        used += 1
        res = minimize(infidelity_and_grad, x0, args=(depth, gmat, target), jac=True, method="BFGS",
                       options={"gtol": 1e-12, "maxiter": max_iter})
        if res.fun < best_f:
            best_x, best_f = res.x, res.fun
        if best_f < tol:
            break
    achieved = infidelity(ansatz_unitary(Ansatz(depth, gate, best_x)), target)
    return SynthesisResult(best_x, achieved, used, achieved < tol, depth, gate)


@functools.lru_cache(maxsize=None)
def local_commutant_dim(gate: str) -> int:
    """Dimension of the local Lie algebra commuting with the entangler."""
    g = native_gate_matrix(gate)
    gens = [np.kron(l, np.eye(3)) for l in _LAMBDAS] + [np.kron(np.eye(3), l) for l in _LAMBDAS]
    cols = np.array([(x @ g - g @ x).ravel() for x in gens]).T
    cols = np.concatenate([cols.real, cols.imag])
    return len(gens) - np.linalg.matrix_rank(cols, tol=1e-9)


def parameter_bound_depth(gate: str) -> int:
    """Smallest depth whose effective parameter count reaches dim SU(9)."""
    g = local_commutant_dim(gate)
    m = 0
    while PARAMS_PER_LAYER * (m + 1) - g * m < SU9_DIM:
        m += 1
    return m


def pad_params(params: np.ndarray) -> np.ndarray:
    """Append an identity local layer, extending a depth-m solution to depth m+1."""
    return np.concatenate([np.asarray(params, dtype=float), np.zeros(PARAMS_PER_LAYER)])


def sample_targets(target_class: str, n: int, rng: np.random.Generator) -> List[np.ndarray]:
    if target_class == "haar":
        return [haar_su9(rng) for _ in range(n)]
    if target_class == "clifford":
        return [random_clifford2(rng) for _ in range(n)]
    raise ValueError("target_class must be 'haar' or 'clifford'")


@dataclass
class CoverageResult:
    gate: str
    target_class: str
    depths: List[int]
    infidelity: np.ndarray  # (n_targets, n_depths)
    solved_at: List[Optional[int]]
    restarts: np.ndarray  # (n_targets, n_depths)
    tol: float = DEFAULT_TOL
    meta: dict = field(default_factory=dict)

    @property
    def success_rate(self) -> np.ndarray:
        solved = np.array([[s is not None and s <= d for d in self.depths] for s in self.solved_at])
        return solved.mean(axis=0)

    def first_full_depth(self) -> Optional[int]:
        for d, r in zip(self.depths, self.success_rate):
            if r >= 1.0:
                return d
        return None

    def to_dict(self) -> dict:
        return {"gate": self.gate, "target_class": self.target_class, "depths": self.depths,
                "tol": self.tol, "success_rate": self.success_rate.tolist(),
                "solved_at": self.solved_at, "infidelity": self.infidelity.tolist(),
                "restarts": self.restarts.tolist(), "meta": self.meta}

    def success_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["depth", "success_rate"])
        for d, r in zip(self.depths, self.success_rate):
            w.writerow([d, f"{r:.6f}"])
        return buf.getvalue()

    def infidelity_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["target"] + [f"depth_{d}" for d in self.depths])
        for i, row in enumerate(self.infidelity):
            w.writerow([i] + [f"{x:.6e}" for x in row])
        return buf.getvalue()


def _study_target(args):
    (target, gate, max_depth, restarts, extra, bound_restarts, tol, seed, max_iter) = args
    rng = np.random.default_rng(seed)
    bound = parameter_bound_depth(gate)
    infid = np.full(max_depth + 1, np.nan)
    used = np.zeros(max_depth + 1, dtype=int)
    solved = None
    prev = None
    for d in range(max_depth + 1):
        if solved is not None:
            # successful targets stay successful at larger depth
            infid[d] = infid[solved]
            continue
        budget = bound_restarts if (target.is_generic and d < bound) else restarts
        seeds = [pad_params(prev)] if prev is not None else None
        res = synthesize(target.matrix, gate, d, budget, tol, rng, seeds, max_iter)
        if not res.converged and extra and d >= target.extra_from:
            more = synthesize(target.matrix, gate, d, extra, tol, rng, [res.best_params], max_iter)
            more.restarts_used += res.restarts_used
            res = more if more.achieved_infidelity < res.achieved_infidelity else res
        infid[d] = res.achieved_infidelity
        used[d] = res.restarts_used
        prev = res.best_params
        if res.converged:
            solved = d
    return infid, used, solved


@dataclass
class _Target:
    matrix: np.ndarray
    is_generic: bool
    extra_from: int


def coverage_study(gate: str, target_class: str, n_targets: int, max_depth: int,
                   restarts: int = DEFAULT_RESTARTS, tol: float = DEFAULT_TOL, seed: int = 0,
                   extra_restarts: int = 0, extra_from_depth: Optional[int] = None,
                   bound_restarts: int = 2, workers: int = 1, max_iter: int = MAX_ITER,
                   targets: Optional[Sequence[np.ndarray]] = None) -> CoverageResult:
    """Per-depth success rates for synthesizing random targets with ``gate``.

    Each depth is seeded with the padded best solution of the previous depth.
    Haar targets below the parameter-counting depth cannot be reached, so
    only ``bound_restarts`` starts are spent there. Targets failing at depth
    ``>= extra_from_depth`` get ``extra_restarts`` more starts before counting
    as failures.
    """
    if n_targets < 1:
        raise ValueError("n_targets must be at least 1")
    if gate not in ENTANGLERS:
        raise ValueError(f"gate must be one of {ENTANGLERS}")
    ss = np.random.SeedSequence(seed)
    target_seq, *run_seqs = ss.spawn(n_targets + 1)
    if targets is None:
        targets = sample_targets(target_class, n_targets, np.random.default_rng(target_seq))
    targets = list(targets)[:n_targets]
    extra_from = max_depth + 1 if extra_from_depth is None else extra_from_depth
    jobs = [(_Target(t, target_class == "haar", extra_from), gate, max_depth, restarts, extra_restarts,
             bound_restarts, tol, run_seqs[i], max_iter) for i, t in enumerate(targets)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            out = list(pool.map(_study_target, jobs))
    else:
        out = [_study_target(j) for j in jobs]
    return CoverageResult(
        gate, target_class, list(range(max_depth + 1)),
        np.array([o[0] for o in out]), [o[2] for o in out], np.array([o[1] for o in out]), tol,
        {"restarts": restarts, "extra_restarts": extra_restarts, "extra_from_depth": extra_from_depth,
         "bound_restarts": bound_restarts, "parameter_bound_depth": parameter_bound_depth(gate),
         "seed": seed})
