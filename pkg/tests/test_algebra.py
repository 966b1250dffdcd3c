import itertools

import numpy as np
import pytest
from scipy.stats import unitary_group

from qutritkerr import algebra as alg
from qutritkerr.algebra import WeylLabel


def test_weyl_identity_label():
    assert np.allclose(alg.weyl_matrix(WeylLabel((0,), (0,))), np.eye(3))


def test_weyl_shift_is_cyclic():
    x = alg.weyl_matrix(WeylLabel((1,), (0,)))
    for j in range(3):
        e = np.zeros(3)
        e[j] = 1
        assert np.allclose(x @ e, np.roll(e, 1))


def test_weyl_trace_norm_single():
    w = alg.weyl_matrix(WeylLabel((1,), (1,)))
    assert np.isclose(np.trace(w.conj().T @ w), 3)


@pytest.mark.parametrize("n", [1, 2])
def test_weyl_trace_orthogonality_exhaustive(n):
    stack = alg.weyl_stack(n)
    gram = np.einsum("aji,bji->ab", stack.conj(), stack)
    assert np.allclose(gram, 3 ** n * np.eye(9 ** n), atol=1e-12)


def test_label_index_roundtrip():
    for n in (1, 2):
        for i, lab in enumerate(alg.weyl_labels(n)):
            assert lab.index == i
            assert WeylLabel.from_index(i, n) == lab


def test_label_group_law_closure():
    labels = alg.weyl_labels(2)
    as_set = set(labels)
    for a, b in itertools.product(labels[:20], labels):
        assert a + b in as_set
        # product of operators is proportional to the summed label
        prod = alg.weyl_matrix(a) @ alg.weyl_matrix(b)
        target = alg.weyl_matrix(a + b)
        c = np.trace(target.conj().T @ prod) / 9
        assert np.isclose(abs(c), 1)
        assert np.allclose(prod, c * target)


def test_invalid_label_rejected():
    with pytest.raises(ValueError):
        WeylLabel((3,), (0,))


def test_gellmann_lambda8():
    assert np.allclose(alg.gellmann_matrix(8), np.diag([1, 1, -2]) / np.sqrt(3))
    assert np.allclose(alg.gellmann_matrix(0), np.eye(3))


def test_gellmann_displayed_offdiagonals():
    assert np.allclose(alg.gellmann_matrix(2), [[0, -1j, 0], [1j, 0, 0], [0, 0, 0]])
    assert np.allclose(alg.gellmann_matrix(5), [[0, 0, -1j], [0, 0, 0], [1j, 0, 0]])
    assert np.allclose(alg.gellmann_matrix(7), [[0, 0, 0], [0, 0, -1j], [0, 1j, 0]])


def test_gellmann_trace_relations():
    for i in range(1, 9):
        li = alg.gellmann_matrix(i)
        assert np.allclose(li, li.conj().T)
        assert abs(np.trace(li)) < 1e-14
        for j in range(1, 9):
            expected = 2.0 if i == j else 0.0
            assert np.isclose(np.trace(li @ alg.gellmann_matrix(j)), expected)


def test_gellmann_index_out_of_range():
    with pytest.raises(ValueError):
        alg.gellmann_matrix(9)


def test_gellmann_reconstructs_hermitian():
    rng = np.random.default_rng(1)
    for _ in range(20):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = a + a.conj().T
        coeffs = alg.gellmann_coefficients(h)
        assert np.allclose(coeffs.imag, 0, atol=1e-14)
        assert np.allclose(alg.from_gellmann_coefficients(coeffs), h, atol=1e-13)


def test_basis_identity_first():
    b = alg.gellmann_basis(2)
    assert np.allclose(b[0], np.eye(9) / 3)


def test_identity_channel_ptm():
    assert np.allclose(alg.channel_to_ptm(np.eye(9)), np.eye(81), atol=1e-12)


def test_depolarizing_ptm_from_kraus():
    p = 0.83
    stack = alg.weyl_stack(2)
    weights = np.full(81, (1 - p) / 81)
    weights[0] += p
    kraus = [np.sqrt(w) * k for w, k in zip(weights, stack)]
    ptm = alg.channel_to_ptm(kraus)
    assert np.allclose(ptm, alg.depolarizing_ptm(p, 2), atol=1e-12)


def test_ptm_representation_property():
    u = unitary_group.rvs(9, random_state=3)
    assert np.allclose(alg.channel_to_ptm(u) @ alg.channel_to_ptm(u.conj().T), np.eye(81), atol=1e-10)


def test_ptm_functoriality_and_orthogonality():
    rng = np.random.default_rng(5)
    for _ in range(3):
        u = unitary_group.rvs(9, random_state=rng)
        v = unitary_group.rvs(9, random_state=rng)
        pu, pv = alg.channel_to_ptm(u), alg.channel_to_ptm(v)
        assert np.allclose(alg.channel_to_ptm(u @ v), pu @ pv, atol=1e-10)
        assert np.allclose(pu.T @ pu, np.eye(81), atol=1e-10)
        assert np.allclose(pu[0], np.eye(81)[0], atol=1e-12)


def test_ptm_dimension_mismatch():
    with pytest.raises(ValueError):
        alg.channel_to_ptm(np.eye(9), n=1)
    with pytest.raises(ValueError):
        alg.channel_to_ptm([np.eye(3), np.eye(9)])


def test_choi_roundtrip_and_apply():
    rng = np.random.default_rng(7)
    u = unitary_group.rvs(9, random_state=rng)
    kraus = [np.sqrt(0.7) * u, np.sqrt(0.3) * np.eye(9)]
    choi = alg.choi_from_kraus(kraus)
    assert np.isclose(np.trace(choi), 9)
    rho = np.outer(u[:, 0], u[:, 0].conj())
    assert np.allclose(alg.choi_apply(choi, rho), alg.apply_channel(kraus, rho))
    ptm = alg.channel_to_ptm(kraus)
    assert np.allclose(alg.choi_to_ptm(choi), ptm, atol=1e-12)
    assert np.allclose(alg.ptm_to_choi(ptm), choi, atol=1e-12)


def test_character_matches_matrix_definition():
    for n in (1, 2):
        labels = alg.weyl_labels(n)
        table = alg.character_table(n)
        for v in labels[:: 7 if n == 2 else 1]:
            V = alg.weyl_matrix(v)
            for w in labels:
                W = alg.weyl_matrix(w)
                direct = np.trace(V.conj().T @ W @ V @ W.conj().T) / 3 ** n
                assert np.isclose(alg.weyl_character(v, w), direct)
                assert np.isclose(table[v.index, w.index], direct)


def test_character_identity_row():
    ident = WeylLabel.identity(2)
    assert all(alg.weyl_character(ident, w) == 1 for w in alg.weyl_labels(2))


def test_character_xz_single_is_primitive_root():
    chi = alg.weyl_character(WeylLabel((1,), (0,)), WeylLabel((0,), (1,)))
    X = alg.shift_matrix()
    Z = alg.clock_matrix()
    direct = np.trace(X.conj().T @ Z @ X @ Z.conj().T) / 3
    assert np.isclose(chi, direct)
    assert np.isclose(chi ** 3, 1) and not np.isclose(chi, 1)


@pytest.mark.parametrize("n", [1, 2])
def test_character_orthonormality(n):
    t = alg.character_table(n)
    gram = t.conj() @ t.T / 9 ** n
    assert np.allclose(gram, np.eye(9 ** n), atol=1e-12)


def test_is_clifford_weyl_is_identity_permutation():
    for lab in alg.weyl_labels(2)[::5]:
        perm = alg.is_clifford(alg.weyl_matrix(lab))
        assert perm == tuple(range(81))


def test_is_clifford_rejects_haar():
    rng = np.random.default_rng(11)
    for _ in range(100):
        assert alg.is_clifford(unitary_group.rvs(9, random_state=rng)) is None


def test_conjugate_label():
    X = alg.weyl_matrix(WeylLabel((1,), (0,)))
    lab, phase = alg.conjugate_label(X, WeylLabel((0,), (1,)))
    assert lab == WeylLabel((0,), (1,))
    assert np.isclose(abs(phase), 1)
