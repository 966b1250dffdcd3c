"""Two-qutrit state and process tomography with maximum-likelihood reconstruction."""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .algebra import choi_to_ptm, gellmann_basis, ptm_to_choi, unitary_to_ptm
from .simulator import Circuit, Gate, native_gate_matrix

# Per-qutrit gate words, listed in application order.
SETTING_WORDS: Tuple[Tuple[str, ...], ...] = (
    (),
    ("X01_half",),
    ("Y01_half",),
    ("X01_pi",),
    ("X01_pi", "X12_pi"),
    ("X01_half", "Y12_pi"),
    ("X01_pi", "X12_half"),
    ("X01_pi", "Y12_half"),
    ("X01_half", "X12_pi"),
)
MIN_SHOTS = 10
MAX_ITER = 5000
REL_TOL = 1e-10
STALL_LIMIT = 25  # consecutive rejected steps at a boundary optimum


@dataclass
class ReconstructionResult:
    """MLE estimate with its log-likelihood history.

    ``estimate`` is a density matrix for state tomography or a PTM for
    process tomography (the Choi matrix is kept alongside).
    """

    estimate: np.ndarray
    loglik_trace: List[float]
    diagnostics: dict = field(default_factory=dict)
    choi: Optional[np.ndarray] = None

    def to_json(self) -> str:
        est = [[float(z.real), float(z.imag)] for z in np.asarray(self.estimate, complex).reshape(-1)]
        return json.dumps({"shape": list(self.estimate.shape), "estimate": est,
                           "loglik_final": self.loglik_trace[-1] if self.loglik_trace else None,
                           "diagnostics": self.diagnostics})


def setting_unitary(word: Sequence[str]) -> np.ndarray:
    u = np.eye(3, dtype=complex)
    for kind in word:
        u = native_gate_matrix(kind) @ u
    return u


@functools.lru_cache(maxsize=None)
def single_qutrit_settings() -> np.ndarray:
    return np.array([setting_unitary(w) for w in SETTING_WORDS])


@functools.lru_cache(maxsize=None)
def two_qutrit_settings() -> np.ndarray:
    s = single_qutrit_settings()
    return np.array([np.kron(a, b) for a, b in itertools.product(s, s)])


@functools.lru_cache(maxsize=None)
def povm_elements() -> np.ndarray:
    """``E[s, o] = U_s |o><o| U_s^dag`` for the 81 settings, shape (81, 9, 9, 9).

    Setting ``s`` rotates by ``U_s^dag`` before a computational-basis
    readout, i.e. it measures in the basis prepared by ``U_s``.
    """
    us = two_qutrit_settings()
    e = np.einsum("sio,sjo->soij", us, us.conj())
    e.setflags(write=False)
    return e


def measurement_rank(n: int = 2) -> int:
    """Rank of the map from Hermitian operators to outcome probabilities."""
    if n == 1:
        us = single_qutrit_settings()
        e = np.einsum("sio,sjo->soij", us, us.conj()).reshape(-1, 9)
    else:
        e = povm_elements().reshape(-1, 81)
    return int(np.linalg.matrix_rank(e, tol=1e-9))


def setting_circuits(word_a: Sequence[str], word_b: Sequence[str]) -> List[Gate]:
    """Preparation gates: each word applied to its qutrit."""
    return [Gate(k, (0,)) for k in word_a] + [Gate(k, (1,)) for k in word_b]


def measurement_circuits(word_a: Sequence[str], word_b: Sequence[str]) -> List[Gate]:
    """Pre-readout rotations: the inverse of each preparation word."""
    ops = []
    for q, word in ((0, word_a), (1, word_b)):
        if word:
            ops.append(Gate("CustomUnitary", (q,), matrix=setting_unitary(word).conj().T))
    return ops


def _settings_pairs():
    return list(itertools.product(SETTING_WORDS, SETTING_WORDS))


def _check_complete():
    rank = measurement_rank(2)
    if rank != 81:
        raise AssertionError(f"measurement map rank {rank} < 81")


def _loglik(counts: np.ndarray, probs: np.ndarray) -> float:
    mask = counts > 0
    return float(np.sum(counts[mask] * np.log(np.clip(probs[mask], 1e-300, None))))


def _project_density(rho: np.ndarray) -> np.ndarray:
    """Closest unit-trace PSD matrix in Frobenius norm (eigenvalue simplex projection)."""
    rho = (rho + rho.conj().T) / 2
    w, v = np.linalg.eigh(rho)
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1
    k = np.nonzero(u - css / np.arange(1, len(u) + 1) > 0)[0][-1]
    w = np.clip(w - css[k] / (k + 1), 0, None)
    return (v * w) @ v.conj().T


def linear_inversion_state(counts: np.ndarray) -> np.ndarray:
    e = povm_elements().reshape(-1, 81)
    freqs = (counts / counts.sum(axis=1, keepdims=True)).reshape(-1)
    # tr(E rho) = vec(E^*) . vec(rho)
    sol, *_ = np.linalg.lstsq(e.conj(), freqs.astype(complex), rcond=None)
    rho = sol.reshape(9, 9)
    return (rho + rho.conj().T) / 2


def mle_state(counts: np.ndarray, max_iter: int = MAX_ITER, tol: float = REL_TOL) -> ReconstructionResult:
    """Diluted ``R rho R`` iteration started from the projected linear-inversion estimate.

    ``counts`` has shape (81 settings, 9 outcomes).
    """
    e = povm_elements()
    rho = 0.99 * _project_density(linear_inversion_state(counts)) + 0.01 * np.eye(9) / 9
    weights = counts / counts.sum(axis=1, keepdims=True).clip(1)

    def probs(r):
        return np.real(np.einsum("soij,ji->so", e, r))

    p = probs(rho)
    ll = _loglik(counts, p)
    trace = [ll]
    eps = 1.0
    for _ in range(max_iter):
        ratio = np.where(counts > 0, weights / np.clip(p, 1e-300, None), 0.0)
        r_op = np.einsum("so,soij->ij", ratio, e) / len(e)
        accepted = False
        for _ in range(60):
            a = (np.eye(9) + eps * r_op) / (1 + eps)
            cand = a @ rho @ a.conj().T
            cand = (cand + cand.conj().T) / 2
            cand /= np.real(np.trace(cand))
            pc = probs(cand)
            llc = _loglik(counts, pc)
            if llc >= ll:
                accepted = True
                break
            eps /= 2
        if not accepted:
            break
        rel = abs(llc - ll) / max(abs(ll), 1e-300)
        rho, p, ll = cand, pc, llc
        trace.append(ll)
        eps = min(eps * 2, 1e6)
        if rel < tol:
            break
    w = np.linalg.eigvalsh(rho)
    diag = {"min_eigenvalue": float(w.min()), "trace": float(np.real(np.trace(rho))),
            "iterations": len(trace) - 1}
    return ReconstructionResult(rho, trace, diag)


def state_tomography(prep: Circuit, backend, shots_per_setting: int,
                     rng: Optional[np.random.Generator] = None) -> ReconstructionResult:
    """Measure ``prep`` in all 81 settings and reconstruct the state by MLE."""
    _check_complete()
    if prep.n_qutrits != 2:
        raise ValueError("two-qutrit preparation expected")
    if shots_per_setting < MIN_SHOTS:
        raise ValueError(f"need at least {MIN_SHOTS} shots per setting")
    rng = np.random.default_rng() if rng is None else rng
    counts = np.array([
        backend.run(Circuit(2, list(prep.ops) + measurement_circuits(wa, wb)), shots_per_setting, rng)
        for wa, wb in _settings_pairs()
    ])
    res = mle_state(counts)
    res.diagnostics["counts"] = counts
    return res


def state_fidelity(rho: np.ndarray, psi: np.ndarray) -> float:
    """``<psi| rho |psi>`` for a pure target."""
    return float(np.real(np.vdot(psi, rho @ psi)))


# ---------------------------------------------------------------- processes

def _project_psd(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return (v * np.clip(w, 0, None)) @ v.conj().T


def _partial_trace_out(j: np.ndarray, d: int) -> np.ndarray:
    return np.einsum("acbc->ab", j.reshape(d, d, d, d))


def project_cptp(j: np.ndarray, d: int = 9, y0: Optional[np.ndarray] = None,
                 tol: float = 1e-10, return_dual: bool = False):
    """Frobenius projection onto CPTP Choi matrices.

    Solves the dual over the Hermitian multiplier ``Y`` of the
    trace-preservation constraint: the projection is ``PSD(J - Y (x) I)``
    with ``Y`` maximizing a smooth concave function, found by L-BFGS.
    """
    j = (j + j.conj().T) / 2
    basis = gellmann_basis(1) if d == 3 else _herm_basis(d)
    eye_out = np.eye(d)

    def unpack(c):
        return np.einsum("a,aij->ij", c, basis)

    def neg_dual(c):
        y = unpack(c)
        x = _project_psd(j - np.kron(y, eye_out))
        diff = x - j
        val = 0.5 * np.vdot(diff, diff).real + np.vdot(np.kron(y, eye_out), x).real - np.trace(y).real
        grad = np.real(np.einsum("aij,ji->a", basis, _partial_trace_out(x, d) - np.eye(d)))
        return -val, -grad

    c0 = np.zeros(len(basis)) if y0 is None else np.real(np.einsum("aij,ji->a", basis, y0))
    res = minimize(neg_dual, c0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 2000, "gtol": tol, "ftol": 1e-16, "maxcor": 30})
    y = unpack(res.x)
    x = _project_psd(j - np.kron(y, eye_out))
    return (x, y) if return_dual else x


@functools.lru_cache(maxsize=None)
def _herm_basis(d: int) -> np.ndarray:
    """Trace-orthonormal Hermitian basis of ``d x d`` matrices."""
    out = []
    for a in range(d):
        m = np.zeros((d, d), complex)
        m[a, a] = 1
        out.append(m)
        for b in range(a + 1, d):
            m = np.zeros((d, d), complex)
            m[a, b] = m[b, a] = 1 / np.sqrt(2)
            out.append(m)
            m = np.zeros((d, d), complex)
            m[a, b], m[b, a] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out.append(m)
    return np.array(out)


def tp_defect(j: np.ndarray, d: int = 9) -> float:
    j4 = j.reshape(d, d, d, d)
    return float(np.max(np.abs(np.einsum("acbc->ab", j4) - np.eye(d))))


def _prep_states() -> np.ndarray:
    us = two_qutrit_settings()
    return np.einsum("si,sj->sij", us[:, :, 0], us[:, :, 0].conj())


def _process_probs(j: np.ndarray, rho_in: np.ndarray, e: np.ndarray) -> np.ndarray:
    d = rho_in.shape[1]
    j4 = j.reshape(d, d, d, d)
    out = np.einsum("iab,acbd->icd", rho_in, j4, optimize=True)
    return np.real(np.einsum("icd,sodc->iso", out, e, optimize=True))


def linear_inversion_process(counts: np.ndarray) -> np.ndarray:
    """Least-squares Choi matrix from frequency data of shape (81, 81, 9)."""
    rho_in = _prep_states()
    freqs = counts / counts.sum(axis=2, keepdims=True)
    # reconstruct each output state, then invert the preparation map
    outs = np.array([linear_inversion_state_from_freqs(f) for f in freqs])
    a = rho_in.reshape(81, 81)
    coeffs, *_ = np.linalg.lstsq(a, outs.reshape(81, 81), rcond=None)
    # coeffs[k, :] gives Lambda(|a><b|) with k = (a, b)
    j4 = coeffs.reshape(9, 9, 9, 9).transpose(0, 2, 1, 3)
    j = j4.reshape(81, 81)
    return (j + j.conj().T) / 2


def linear_inversion_state_from_freqs(freqs: np.ndarray) -> np.ndarray:
    e = povm_elements().reshape(-1, 81)
    sol, *_ = np.linalg.lstsq(e.conj(), freqs.reshape(-1).astype(complex), rcond=None)
    rho = sol.reshape(9, 9)
    return (rho + rho.conj().T) / 2


def _process_grad(rho_in: np.ndarray, e: np.ndarray, ratio: np.ndarray) -> np.ndarray:
    """Ascent direction of the log-likelihood with respect to the Choi matrix."""
    d = rho_in.shape[1]
    m = (ratio.reshape(len(ratio), -1) @ e.reshape(-1, d * d)).reshape(-1, d, d)
    # dp/dJ4[a,c,b,d] = rho[a,b] E[d,c]; the Frobenius gradient is its conjugate
    g = np.einsum("iab,idc->acbd", rho_in, m, optimize=True).reshape(d * d, d * d).conj()
    return (g + g.conj().T) / 2


def mle_process(counts: np.ndarray, max_iter: int = MAX_ITER, tol: float = REL_TOL) -> ReconstructionResult:
    """Accelerated projected-gradient MLE over CPTP Choi matrices.

    Monotone FISTA with a backtracked quadratic bound; every ascent step is
    projected back onto the CPTP set and the iterate only moves when the
    log-likelihood does not decrease. ``counts`` has shape
    (81 preparations, 81 settings, 9 outcomes).
    """
    d = 9
    rho_in = _prep_states()
    e = povm_elements()
    n_tot = counts.sum(axis=2, keepdims=True).clip(1)
    freqs = counts / n_tot
    observed = freqs > 0

    def evaluate(j):
        p = _process_probs(j, rho_in, e)
        if np.any(p[observed] <= 0):
            return p, -np.inf
        return p, _loglik(freqs, p)

    x, dual = project_cptp(linear_inversion_process(counts), d, return_dual=True)
    p_x, ll = evaluate(x)
    if not np.isfinite(ll):
        x = 0.99 * x + 0.01 * np.eye(d * d) / d
        p_x, ll = evaluate(x)
    trace = [ll]
    y, p_y, ll_y = x, p_x, ll
    t = 1.0
    step = 1e-3
    stalled = 0
    for _ in range(max_iter):
        ratio = np.where(observed, freqs / np.clip(p_y, 1e-300, None), 0.0)
        g = _process_grad(rho_in, e, ratio)
        for _ in range(60):
            z, dual_z = project_cptp(y + step * g, d, y0=dual, return_dual=True)
            p_z, ll_z = evaluate(z)
            diff = z - y
            bound = ll_y + np.real(np.vdot(g, diff)) - np.real(np.vdot(diff, diff)) / (2 * step)
            if ll_z >= bound:
                break
            step /= 2
        dual = dual_z
        if ll_z >= ll:
            x_new, p_new, ll_new = z, p_z, ll_z
        else:
            x_new, p_new, ll_new = x, p_x, ll
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        y = x_new + (t / t_new) * (z - x_new) + ((t - 1) / t_new) * (x_new - x)
        moved = x_new is not x
        rel = abs(ll_new - ll) / max(abs(ll), 1e-300)
        x, p_x, ll, t = x_new, p_new, ll_new, t_new
        trace.append(ll)
        p_y, ll_y = evaluate(y)
        if not np.isfinite(ll_y) or not moved:
            y, p_y, ll_y, t = x, p_x, ll, 1.0
        step *= 1.5
        stalled = 0 if moved else stalled + 1
        if (moved and rel < tol) or stalled >= STALL_LIMIT:
            break
    w = np.linalg.eigvalsh(x)
    diag = {"choi_min_eigenvalue": float(w.min()), "tp_defect": tp_defect(x, d),
            "iterations": len(trace) - 1}
    return ReconstructionResult(choi_to_ptm(x), trace, diag, choi=x)


def process_tomography(gate: Circuit, backend, shots: int,
                       rng: Optional[np.random.Generator] = None,
                       max_iter: int = MAX_ITER) -> ReconstructionResult:
    """81 preparations x 81 measurement settings, reconstructed as a CPTP PTM."""
    _check_complete()
    if gate.n_qutrits != 2:
        raise ValueError("two-qutrit gate expected")
    if shots < MIN_SHOTS:
        raise ValueError(f"need at least {MIN_SHOTS} shots per setting")
    rng = np.random.default_rng() if rng is None else rng
    pairs = _settings_pairs()
    counts = np.empty((81, 81, 9), dtype=np.int64)
    for i, (pa, pb) in enumerate(pairs):
        prep_ops = setting_circuits(pa, pb) + list(gate.ops)
        for s, (ma, mb) in enumerate(pairs):
            counts[i, s] = backend.run(Circuit(2, prep_ops + measurement_circuits(ma, mb)), shots, rng)
    res = mle_process(counts, max_iter=max_iter)
    res.diagnostics["shots"] = shots
    return res


def process_fidelity(e_exp: np.ndarray, e_ideal: np.ndarray) -> float:
    """``Tr[E_ideal^dag E_exp] / D^2`` for PTMs."""
    e_exp, e_ideal = np.asarray(e_exp), np.asarray(e_ideal)
    if e_exp.shape != e_ideal.shape or e_exp.ndim != 2:
        raise ValueError("PTM dimension mismatch")
    return float(np.real(np.trace(e_ideal.conj().T @ e_exp)) / e_exp.shape[0])


def ptm_of_choi(j: np.ndarray) -> np.ndarray:
    return choi_to_ptm(j)


__all__ = [
    "ReconstructionResult", "SETTING_WORDS", "measurement_rank", "mle_process", "mle_state",
    "process_fidelity", "process_tomography", "project_cptp", "ptm_to_choi", "state_fidelity",
    "state_tomography", "unitary_to_ptm", "gellmann_basis",
]
