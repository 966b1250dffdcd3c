"""Heisenberg-Weyl and Gell-Mann operator bases for qutrits.

Weyl operators ``X^x Z^z`` are used for twirling and characters, while the
normalized Gell-Mann product basis (identity first) is used for Pauli
transfer matrices.  All dimensions are powers of three.
"""
from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

D = 3
OMEGA = np.exp(2j * np.pi / 3)

ChannelLike = Union[np.ndarray, Sequence[np.ndarray]]


@dataclass(frozen=True)
class WeylLabel:
    """Label ``(x, z)`` of the n-qutrit Weyl operator ``X^x Z^z``.

    Labels are projective: the global phase of the operator is never
    normalized, only the adjoint action matters.
    """

    x: Tuple[int, ...]
    z: Tuple[int, ...]

    def __post_init__(self):
        x = tuple(int(v) for v in self.x)
        z = tuple(int(v) for v in self.z)
        if len(x) != len(z):
            raise ValueError("x and z must have equal length")
        if any(v not in (0, 1, 2) for v in x + z):
            raise ValueError(f"Weyl label entries must lie in {{0,1,2}}, got {x}, {z}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def is_identity(self) -> bool:
        return not any(self.x) and not any(self.z)

    @property
    def index(self) -> int:
        """Position of this label in :func:`weyl_labels` ordering."""
        idx = 0
        for xq, zq in zip(self.x, self.z):
            idx = idx * 9 + 3 * xq + zq
        return idx

    @classmethod
    def from_index(cls, index: int, n: int) -> "WeylLabel":
        x, z = [], []
        for _ in range(n):
            index, r = divmod(index, 9)
            x.append(r // 3)
            z.append(r % 3)
        return cls(tuple(reversed(x)), tuple(reversed(z)))

    @classmethod
    def identity(cls, n: int) -> "WeylLabel":
        return cls((0,) * n, (0,) * n)

    def __add__(self, other: "WeylLabel") -> "WeylLabel":
        return WeylLabel(
            tuple((a + b) % 3 for a, b in zip(self.x, other.x)),
            tuple((a + b) % 3 for a, b in zip(self.z, other.z)),
        )

    def __neg__(self) -> "WeylLabel":
        return WeylLabel(tuple(-a % 3 for a in self.x), tuple(-a % 3 for a in self.z))

    def __str__(self):
        return "".join(f"[{a}{b}]" for a, b in zip(self.x, self.z))


def weyl_labels(n: int) -> list:
    """All ``9**n`` labels; per-qutrit pairs ``(x_q, z_q)`` in lexicographic order."""
    pairs = [(a, b) for a in range(3) for b in range(3)]
    out = []
    for combo in itertools.product(pairs, repeat=n):
        out.append(WeylLabel(tuple(p[0] for p in combo), tuple(p[1] for p in combo)))
    return out


def shift_matrix() -> np.ndarray:
    """Cyclic shift ``X|j> = |j+1 mod 3>``."""
    return np.roll(np.eye(D, dtype=complex), 1, axis=0)


def clock_matrix() -> np.ndarray:
    return np.diag(OMEGA ** np.arange(D))


def kron_all(mats: Iterable[np.ndarray]) -> np.ndarray:
    return functools.reduce(np.kron, mats, np.ones((1, 1), dtype=complex))


def weyl_matrix(label: WeylLabel) -> np.ndarray:
    """Dense matrix of ``X^x Z^z`` as a tensor product over qutrits."""
    X, Z = shift_matrix(), clock_matrix()
    factors = [
        np.linalg.matrix_power(X, xq) @ np.linalg.matrix_power(Z, zq)
        for xq, zq in zip(label.x, label.z)
    ]
    return kron_all(factors)


@functools.lru_cache(maxsize=None)
def _weyl_stack(n: int) -> np.ndarray:
    stack = np.array([weyl_matrix(lab) for lab in weyl_labels(n)])
    stack.setflags(write=False)
    return stack


def weyl_stack(n: int) -> np.ndarray:
    """Read-only array of shape ``(9**n, 3**n, 3**n)`` of all Weyl matrices."""
    return _weyl_stack(n)


def symplectic_form(v: WeylLabel, w: WeylLabel) -> int:
    """Exponent ``k`` such that ``W V W^dag = omega^k V``."""
    return sum(zw * xv - xw * zv for xv, zv, xw, zw in zip(v.x, v.z, w.x, w.z)) % 3


def weyl_character(v: WeylLabel, w: WeylLabel) -> complex:
    """Character ``chi_V(W) = tr(V^dag W V W^dag) / 3**n``.

    Always a cube root of unity; computed from the commutation phase rather
    than by forming the matrices.
    """
    if v.n != w.n:
        raise ValueError("labels act on different numbers of qutrits")
    return complex(OMEGA ** symplectic_form(v, w))


def character_table(n: int) -> np.ndarray:
    """Matrix ``T[v, w] = chi_v(w)`` over all labels."""
    labels = weyl_labels(n)
    x = np.array([lab.x for lab in labels])
    z = np.array([lab.z for lab in labels])
    k = (x @ z.T - z @ x.T) % 3  # k[v, w] = sum x_v z_w - z_v x_w
    return OMEGA ** k


# --- Gell-Mann basis ------------------------------------------------------

def _build_gellmann() -> np.ndarray:
    g = np.zeros((9, 3, 3), dtype=complex)
    g[0] = np.eye(3)
    g[1][0, 1] = g[1][1, 0] = 1
    g[2][0, 1], g[2][1, 0] = -1j, 1j
    g[3] = np.diag([1, -1, 0])
    g[4][0, 2] = g[4][2, 0] = 1
    g[5][0, 2], g[5][2, 0] = -1j, 1j
    g[6][1, 2] = g[6][2, 1] = 1
    g[7][1, 2], g[7][2, 1] = -1j, 1j
    g[8] = np.diag([1, 1, -2]) / np.sqrt(3)
    g.setflags(write=False)
    return g


_GELLMANN = _build_gellmann()


def gellmann_matrix(idx: Union[int, Sequence[int]]) -> np.ndarray:
    """Gell-Mann matrix ``lambda_idx`` (``0`` gives the identity).

    A tuple of indices gives the tensor product over qutrits.
    """
    if isinstance(idx, (int, np.integer)):
        if not 0 <= idx <= 8:
            raise ValueError(f"Gell-Mann index out of range: {idx}")
        return _GELLMANN[idx].copy()
    return kron_all(gellmann_matrix(i) for i in idx)


@functools.lru_cache(maxsize=None)
def _normalized_basis(n: int) -> np.ndarray:
    single = np.array([_GELLMANN[i] / np.sqrt(np.trace(_GELLMANN[i] @ _GELLMANN[i]).real)
                       for i in range(9)])
    basis = np.array([kron_all(single[list(t)]) for t in itertools.product(range(9), repeat=n)])
    basis.setflags(write=False)
    return basis


def gellmann_basis(n: int) -> np.ndarray:
    """Trace-orthonormal Hermitian basis of shape ``(9**n, 3**n, 3**n)``.

    Elements are ordered lexicographically in the per-qutrit index tuple, so
    the (normalized) identity comes first.
    """
    return _normalized_basis(n)


def gellmann_coefficients(op: np.ndarray) -> np.ndarray:
    """Coefficients ``tr(B_a op)`` in the normalized Gell-Mann basis."""
    n = _num_qutrits(op.shape[0])
    basis = gellmann_basis(n)
    return np.einsum("aji,ji->a", basis.conj(), op)


def from_gellmann_coefficients(coeffs: np.ndarray) -> np.ndarray:
    n = _num_qutrits(int(round(np.sqrt(len(coeffs)))))
    return np.einsum("a,aij->ij", coeffs, gellmann_basis(n))


def _num_qutrits(dim: int) -> int:
    n = int(round(np.log(dim) / np.log(3)))
    if 3 ** n != dim:
        raise ValueError(f"dimension {dim} is not a power of 3")
    return n


# --- channels and transfer matrices ---------------------------------------

def as_kraus(channel: ChannelLike) -> list:
    """Normalize a unitary or a Kraus sequence to a list of Kraus matrices."""
    if isinstance(channel, np.ndarray) and channel.ndim == 2:
        return [channel]
    ops = [np.asarray(k, dtype=complex) for k in channel]
    if not ops:
        raise ValueError("empty Kraus set")
    return ops


def apply_channel(channel: ChannelLike, rho: np.ndarray) -> np.ndarray:
    return sum(k @ rho @ k.conj().T for k in as_kraus(channel))


def channel_to_ptm(channel: ChannelLike, n: Optional[int] = None) -> np.ndarray:
    """Real transfer matrix ``R[a, b] = tr(B_a Lambda(B_b))``.

    Args:
        channel: a unitary matrix or a sequence of Kraus operators.
        n: expected number of qutrits; checked against the operator size.
    """
    kraus = as_kraus(channel)
    dim = kraus[0].shape[0]
    if any(k.shape != (dim, dim) for k in kraus):
        raise ValueError("Kraus operators have inconsistent shapes")
    m = _num_qutrits(dim)
    if n is not None and n != m:
        raise ValueError(f"channel acts on {m} qutrits, expected {n}")
    basis = gellmann_basis(m)
    images = sum(np.einsum("ij,bjk,lk->bil", k, basis, k.conj()) for k in kraus)
    ptm = np.einsum("aji,bji->ab", basis.conj(), images)
    return ptm.real


def unitary_to_ptm(u: np.ndarray) -> np.ndarray:
    return channel_to_ptm(u)


def depolarizing_ptm(p: float, n: int) -> np.ndarray:
    ptm = np.eye(9 ** n) * p
    ptm[0, 0] = 1.0
    return ptm


def depolarize(rho: np.ndarray, p: float) -> np.ndarray:
    """Global depolarizing channel ``p rho + (1 - p) tr(rho) I / dim``."""
    dim = rho.shape[0]
    return p * rho + (1 - p) * np.trace(rho) * np.eye(dim) / dim


def choi_from_kraus(channel: ChannelLike) -> np.ndarray:
    """Choi matrix ``J = sum_ij |i><j| (x) Lambda(|i><j|)`` (trace = dim)."""
    kraus = as_kraus(channel)
    dim = kraus[0].shape[0]
    vecs = [k.T.reshape(-1) for k in kraus]  # vec of (I (x) K)|Omega> with input first
    return sum(np.outer(v, v.conj()) for v in vecs).reshape(dim * dim, dim * dim)


def choi_apply(choi: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """``Lambda(rho) = tr_in[(rho^T (x) I) J]``."""
    dim = rho.shape[0]
    j4 = choi.reshape(dim, dim, dim, dim)  # [i, l, j, m]
    return np.einsum("ij,iljm->lm", rho, j4)


def choi_to_ptm(choi: np.ndarray) -> np.ndarray:
    dim = int(round(np.sqrt(choi.shape[0])))
    basis = gellmann_basis(_num_qutrits(dim))
    j4 = choi.reshape(dim, dim, dim, dim)
    images = np.einsum("bij,iljm->blm", basis, j4)
    return np.einsum("aji,bji->ab", basis.conj(), images).real


def ptm_to_choi(ptm: np.ndarray) -> np.ndarray:
    n = _num_qutrits(int(round(np.sqrt(ptm.shape[0]))))
    basis = gellmann_basis(n)
    dim = 3 ** n
    # Lambda(|i><j|) = sum_ab R_ab tr(B_b |i><j|) B_a, and tr(B_b |i><j|) = B_b[j, i]
    j4 = np.einsum("ab,bji,alm->iljm", ptm, basis, basis)
    return j4.reshape(dim * dim, dim * dim)


# --- Clifford membership ---------------------------------------------------

def is_clifford(u: np.ndarray, atol: float = 1e-9) -> Optional[Tuple[int, ...]]:
    """Return the induced Weyl-label permutation if ``u`` is Clifford.

    For each label ``w`` the returned tuple gives the index of the label ``v``
    with ``u W_w u^dag`` proportional to ``W_v``; the proportionality is
    checked in max-norm after optimal phase alignment.  Returns ``None`` when
    some conjugate is not a scaled Weyl operator.
    """
    u = np.asarray(u, dtype=complex)
    n = _num_qutrits(u.shape[0])
    dim = 3 ** n
    stack = weyl_stack(n)
    conj = np.einsum("ij,wjk,lk->wil", u, stack, u.conj())
    coeffs = np.einsum("vji,wji->wv", stack.conj(), conj) / dim
    best = np.argmax(np.abs(coeffs), axis=1)
    perm = []
    for w, v in enumerate(best):
        c = coeffs[w, v]
        if abs(abs(c) - 1) > atol:
            return None
        if np.max(np.abs(conj[w] - c * stack[v])) > atol:
            return None
        perm.append(int(v))
    if len(set(perm)) != len(perm):
        return None
    return tuple(perm)


def conjugate_label(u: np.ndarray, label: WeylLabel) -> Tuple[WeylLabel, complex]:
    """Label and phase of ``u W u^dag`` for a Clifford ``u``."""
    w = weyl_matrix(label)
    m = u @ w @ u.conj().T
    n = label.n
    stack = weyl_stack(n)
    coeffs = np.einsum("vji,ji->v", stack.conj(), m) / 3 ** n
    v = int(np.argmax(np.abs(coeffs)))
    if abs(abs(coeffs[v]) - 1) > 1e-9:
        raise ValueError("operator does not map the Weyl label to a Weyl label")
    return WeylLabel.from_index(v, n), complex(coeffs[v])
