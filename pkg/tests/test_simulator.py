import math

import numpy as np
import pytest
from scipy import stats

from qutritkerr import algebra as alg
from qutritkerr.simulator import (
    Circuit, Gate, NoiseModel, SimulatorBackend, count_pulses, counts_dict, decompose_su3,
    gates_product, haar_su3, haar_su9, native_gate_matrix, random_clifford2, run,
    sample_shots, subspace_controlled_gates,
)
from qutritkerr.simulator.engine import depolarize_targets

W = np.exp(2j * np.pi / 3)
FIXED = ["X01_half", "X12_half", "X01_pi", "X12_pi", "Y01_half", "Y12_half", "Y01_pi",
         "Y12_pi", "H3", "S3", "CZ", "CZdag", "CSUM"]


def basis(*levels):
    v = np.zeros(3 ** len(levels), dtype=complex)
    v[int("".join(map(str, levels)), 3)] = 1
    return v


def phase_distance(a, b):
    ov = np.trace(b.conj().T @ a)
    return np.max(np.abs(a - ov / abs(ov) * b))


@pytest.mark.parametrize("kind", FIXED)
def test_fixed_gates_unitary(kind):
    u = native_gate_matrix(kind)
    assert np.allclose(u.conj().T @ u, np.eye(len(u)), atol=1e-12)


def test_displayed_half_pi_pulses():
    s = 1 / np.sqrt(2)
    assert np.allclose(native_gate_matrix("X01_half"),
                       [[s, -1j * s, 0], [-1j * s, s, 0], [0, 0, 1]])
    assert np.allclose(native_gate_matrix("X12_half"),
                       [[1, 0, 0], [0, s, -1j * s], [0, -1j * s, s]])


def test_virtual_z_and_hadamard():
    phi = 0.37
    assert np.allclose(native_gate_matrix("Z01", (phi,)), np.diag([np.exp(-1j * phi), 1, 1]))
    assert np.allclose(native_gate_matrix("Z12", (phi,)), np.diag([1, 1, np.exp(1j * phi)]))
    h = native_gate_matrix("H3")
    assert np.isclose(h[2, 1], W ** 2 / np.sqrt(3))


def test_cz_entries_and_order():
    cz = native_gate_matrix("CZ")
    assert np.isclose(cz[4, 4], W)
    assert np.allclose(cz @ cz.conj().T, np.eye(9))
    assert np.allclose(np.linalg.matrix_power(cz, 3), np.eye(9), atol=1e-12)
    assert np.allclose(native_gate_matrix("CZdag"), cz.conj())


def test_diagonal_gates_commute():
    a = np.kron(native_gate_matrix("Z01", (0.3,)), native_gate_matrix("Z12", (1.1,)))
    b = native_gate_matrix("CZ")
    assert np.allclose(a @ b, b @ a)


def test_subspace_controlled_gates():
    g = subspace_controlled_gates()
    cinc, cex = g["Cinc"], g["Cex"]
    assert np.allclose(cinc @ basis(2, 0), basis(2, 1))
    assert np.allclose(cex @ basis(0, 0), basis(0, 0))
    assert np.allclose(cex @ basis(2, 0), basis(2, 1))
    cube = np.linalg.matrix_power(cinc, 3)
    assert np.allclose(cube[6:, 6:], np.eye(3))
    for u in (cinc, cex):
        assert np.allclose(u.conj().T @ u, np.eye(9))


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CZ", (0,))
    with pytest.raises(ValueError):
        Gate("Z01", (0,))
    with pytest.raises(ValueError):
        Gate("nope", (0,))
    with pytest.raises(ValueError):
        Circuit(1, [Gate("H3", (1,))])


def test_empty_circuit_identity():
    psi = haar_su9(np.random.default_rng(0))[:, 0]
    assert np.allclose(run(Circuit(2), psi), psi)


def test_cz_hadamard_uniform_moduli():
    c = Circuit(2, [Gate("H3", (0,)), Gate("H3", (1,)), Gate("CZ", (0, 1))])
    out = run(c, basis(0, 0))
    assert np.allclose(np.abs(out), 1 / 3)


def test_bell_state_with_single_cz():
    c = Circuit(2, [Gate("H3", (0,)), Gate("H3", (1,)), Gate("CZ", (0, 1)),
                    Gate("CustomUnitary", (1,), matrix=native_gate_matrix("H3").conj().T)])
    out = run(c, basis(0, 0))
    target = (basis(0, 0) + basis(1, 1) + basis(2, 2)) / np.sqrt(3)
    assert np.isclose(abs(np.vdot(target, out)) ** 2, 1.0, atol=1e-12)


def test_purity_preserved_and_density_path():
    rng = np.random.default_rng(2)
    c = Circuit(2, [Gate("CustomUnitary", (0, 1), matrix=haar_su9(rng)), Gate("X01_half", (1,))])
    psi = run(c, basis(0, 0))
    rho = run(c, np.outer(basis(0, 0), basis(0, 0).conj()))
    assert np.isclose(np.linalg.norm(psi), 1, atol=1e-10)
    assert np.allclose(rho, np.outer(psi, psi.conj()), atol=1e-12)


def test_channel_on_state_vector_rejected():
    c = Circuit(2, [Gate("DepolarizeChannel", (0, 1), (0.5,))])
    with pytest.raises(ValueError):
        run(c, basis(0, 0))


def test_full_depolarization():
    rho = np.outer(basis(1, 2), basis(1, 2).conj())
    out = run(Circuit(2, [Gate("DepolarizeChannel", (0, 1), (0.0,))]), rho)
    assert np.allclose(out, np.eye(9) / 9)


def test_local_depolarization_matches_kraus():
    rng = np.random.default_rng(4)
    u = haar_su9(rng)
    rho = np.outer(u[:, 0], u[:, 0].conj())
    p = 0.6
    stack = alg.weyl_stack(1)
    kraus = [np.sqrt(p + (1 - p) / 9) * np.eye(9)]
    kraus += [np.sqrt((1 - p) / 9) * np.kron(np.eye(3), k) for k in stack[1:]]
    assert np.allclose(depolarize_targets(rho, p, [1], 2), alg.apply_channel(kraus, rho), atol=1e-12)


def test_depolarizing_composition():
    rho = np.outer(basis(0, 1), basis(0, 1).conj())
    c = Circuit(2, [Gate("DepolarizeChannel", (0, 1), (0.7,)), Gate("DepolarizeChannel", (0, 1), (0.4,))])
    d = Circuit(2, [Gate("DepolarizeChannel", (0, 1), (0.28,))])
    assert np.allclose(run(c, rho), run(d, rho))
    assert np.allclose(alg.depolarizing_ptm(0.7, 2) @ alg.depolarizing_ptm(0.4, 2),
                       alg.depolarizing_ptm(0.28, 2))


def test_sample_shots_basic():
    rng = np.random.default_rng(0)
    counts = sample_shots(basis(0, 0), 100, rng)
    assert counts_dict(counts) == {"00": 100}


def test_sample_shots_uniform():
    rng = np.random.default_rng(1)
    psi = np.ones(9) / 3
    counts = sample_shots(psi, 900_000, rng)
    assert np.all(np.abs(counts / 900_000 - 1 / 9) < 0.002)


def test_sample_shots_confusion_swap():
    swap = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 1]])
    conf = np.kron(swap, np.eye(3))
    counts = sample_shots(basis(0, 0), 50, np.random.default_rng(0), conf)
    assert counts_dict(counts) == {"10": 50}


def test_sample_shots_invalid_confusion():
    with pytest.raises(ValueError):
        sample_shots(basis(0, 0), 10, np.random.default_rng(0), np.ones((9, 9)))


def test_json_roundtrip_bit_exact():
    rng = np.random.default_rng(3)
    ops = [Gate("Z01", (0,), (np.pi / 3,)), Gate("Z12", (1,), (-2 * np.pi / 3,)),
           Gate("Z01", (1,), (0.123456789012345,)), Gate("SU3", (0,), tuple(rng.normal(size=8))),
           Gate("CustomUnitary", (0, 1), matrix=haar_su9(rng)), Gate("CZdag", (0, 1)),
           Gate("DepolarizeChannel", (0, 1), (0.97,))]
    c = Circuit(2, ops, seed=11, label="demo")
    text = c.to_json()
    assert '"pi": [1, 3]' in text
    back = Circuit.from_json(text)
    assert back.seed == 11 and back.label == "demo"
    for a, b in zip(c.ops, back.ops):
        assert a.kind == b.kind and a.targets == b.targets and a.params == b.params
    assert np.array_equal(c.ops[4].matrix, back.ops[4].matrix)


def test_decompose_identity_and_native():
    assert decompose_su3(np.eye(3)) == []
    g = decompose_su3(native_gate_matrix("X01_half"))
    assert len(g) == 1 and g[0].kind == "X01_half"


def test_decompose_rejects_nonunitary():
    with pytest.raises(ValueError):
        decompose_su3(np.ones((3, 3)))


def test_decompose_haar_samples():
    rng = np.random.default_rng(21)
    worst = 0.0
    for _ in range(1000):
        u = haar_su3(rng)
        gates = decompose_su3(u)
        assert count_pulses(gates) <= 6
        worst = max(worst, phase_distance(gates_product(gates), u))
    assert worst < 1e-9


@pytest.mark.parametrize("kind", ["X12_half", "Y01_half", "X01_pi", "Y12_pi", "H3", "S3"])
def test_decompose_structured(kind):
    u = native_gate_matrix(kind)
    gates = decompose_su3(u)
    assert count_pulses(gates) <= 6
    assert phase_distance(gates_product(gates), u) < 1e-9


def test_decompose_diagonal_is_virtual():
    u = np.diag(np.exp(1j * np.array([0.1, -0.4, 0.9])))
    gates = decompose_su3(u)
    assert count_pulses(gates) == 0
    assert phase_distance(gates_product(gates), u) < 1e-12


def test_haar_properties():
    rng = np.random.default_rng(8)
    samples = [haar_su3(rng) for _ in range(10_000)]
    assert np.allclose(samples[0].conj().T @ samples[0], np.eye(3), atol=1e-12)
    assert np.isclose(np.linalg.det(samples[0]), 1)
    moment = np.mean([abs(np.trace(u)) ** 2 / 3 for u in samples])
    assert abs(moment - 1 / 3) < 0.02
    # phases drawn from U(3): eigenangles uniform
    angles = np.concatenate([np.angle(np.linalg.eigvals(
        stats.unitary_group.rvs(3, random_state=rng))) for _ in range(2000)])
    assert stats.kstest(angles, stats.uniform(loc=-np.pi, scale=2 * np.pi).cdf).pvalue > 0.01


def test_haar_left_invariance():
    rng = np.random.default_rng(9)
    fixed = haar_su3(np.random.default_rng(99))
    a = [np.real(np.trace(haar_su3(rng))) for _ in range(4000)]
    b = [np.real(np.trace(fixed @ haar_su3(rng))) for _ in range(4000)]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_haar_su9_unitary():
    u = haar_su9(np.random.default_rng(0))
    assert np.allclose(u.conj().T @ u, np.eye(9), atol=1e-12)
    assert np.isclose(np.linalg.det(u), 1)


def test_random_clifford():
    rng = np.random.default_rng(5)
    us = [random_clifford2(rng) for _ in range(20)]
    assert all(alg.is_clifford(u) is not None for u in us)
    assert alg.is_clifford(us[0] @ us[1]) is not None


def test_cz_reachable_by_clifford_sampler():
    rng = np.random.default_rng(6)
    target = alg.is_clifford(native_gate_matrix("CZ"))
    for _ in range(20000):
        if alg.is_clifford(random_clifford2(rng, check=False)) == target:
            return
    pytest.fail("CZ label action never sampled")


def test_backend_noise_and_determinism():
    noise = NoiseModel().add_depolarizing("CZ", 0.9)
    backend = SimulatorBackend(noise)
    c = Circuit(2, [Gate("H3", (0,)), Gate("CZ", (0, 1))])
    rho = backend.final_state(c)
    assert np.isclose(np.real(np.trace(rho @ rho)), 0.81 + 0.19 / 9)
    a = backend.run(c, 1000, np.random.default_rng(1))
    b = backend.run(c, 1000, np.random.default_rng(1))
    assert np.array_equal(a, b)
