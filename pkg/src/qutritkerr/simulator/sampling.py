"""Haar-random special unitaries and random two-qutrit Cliffords."""
from __future__ import annotations

import functools

import numpy as np
from scipy.stats import unitary_group

from ..algebra import WeylLabel, is_clifford, weyl_matrix
from .gates import cz_matrix, hadamard3, native_gate_matrix

CLIFFORD_WORD_LENGTH = 20


def haar_special_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    u = unitary_group.rvs(dim, random_state=rng)
    return u / np.linalg.det(u) ** (1.0 / dim)


def haar_su3(rng: np.random.Generator) -> np.ndarray:
    return haar_special_unitary(3, rng)


def haar_su9(rng: np.random.Generator) -> np.ndarray:
    return haar_special_unitary(9, rng)


@functools.lru_cache(maxsize=None)
def clifford_generators() -> tuple:
    h, s = hadamard3(), native_gate_matrix("S3")
    eye = np.eye(3)
    return (np.kron(h, eye), np.kron(eye, h), np.kron(s, eye), np.kron(eye, s), cz_matrix(1))


def random_clifford2(rng: np.random.Generator, length: int = CLIFFORD_WORD_LENGTH,
                     check: bool = True) -> np.ndarray:
    """Random Weyl operator times a random generator word of ``length`` letters."""
    gens = clifford_generators()
    x = tuple(int(v) for v in rng.integers(0, 3, size=2))
    z = tuple(int(v) for v in rng.integers(0, 3, size=2))
    u = weyl_matrix(WeylLabel(x, z)).astype(complex)
    for i in rng.integers(0, len(gens), size=length):
        u = gens[i] @ u
    if check and is_clifford(u) is None:
        raise RuntimeError("generated unitary is not Clifford")
    return u
