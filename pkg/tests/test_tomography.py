import numpy as np
import pytest

from qutritkerr import tomography as tomo
from qutritkerr.algebra import (
    channel_to_ptm, choi_from_kraus, depolarizing_ptm, ptm_to_choi, unitary_to_ptm,
)
from qutritkerr.simulator import (
    Circuit, Gate, SimulatorBackend, haar_su9, native_gate_matrix,
)

CZ = native_gate_matrix("CZ")
CZDAG = native_gate_matrix("CZdag")
BELL = np.zeros(9, complex)
BELL[[0, 4, 8]] = 1 / np.sqrt(3)


def bell_circuit():
    h = native_gate_matrix("H3")
    return Circuit(2, [Gate("H3", (0,)), Gate("H3", (1,)), Gate("CZ", (0, 1)),
                       Gate("CustomUnitary", (1,), matrix=h.conj().T)])


def test_informational_completeness():
    assert tomo.measurement_rank(1) == 9
    assert tomo.measurement_rank(2) == 81


def test_setting_words_match_listed_products():
    g = native_gate_matrix
    listed = [np.eye(3), g("X01_half"), g("Y01_half"), g("X01_pi"),
              g("X12_pi") @ g("X01_pi"), g("Y12_pi") @ g("X01_half"),
              g("X12_half") @ g("X01_pi"), g("Y12_half") @ g("X01_pi"),
              g("X12_pi") @ g("X01_half")]
    assert np.allclose(tomo.single_qutrit_settings(), listed)


def test_povm_sums_to_identity_per_setting():
    e = tomo.povm_elements()
    assert np.allclose(e.sum(axis=1), np.eye(9))


def test_state_tomography_ground_state():
    res = tomo.state_tomography(Circuit(2), SimulatorBackend(), 10_000, np.random.default_rng(0))
    psi = np.zeros(9)
    psi[0] = 1
    assert tomo.state_fidelity(res.estimate, psi) >= 0.999


def test_state_tomography_bell():
    res = tomo.state_tomography(bell_circuit(), SimulatorBackend(), 10_000, np.random.default_rng(1))
    rho = res.estimate
    assert tomo.state_fidelity(rho, BELL) >= 0.99
    assert np.all(np.diff(res.loglik_trace) >= 0)
    assert np.isclose(np.trace(rho).real, 1, atol=1e-8)
    assert np.linalg.eigvalsh(rho).min() >= -1e-8
    assert np.allclose(rho, rho.conj().T)


@pytest.mark.parametrize("p", [0.8, 0.95])
def test_state_tomography_depolarized_bell(p):
    c = bell_circuit().append(Gate("DepolarizeChannel", (0, 1), (p,)))
    res = tomo.state_tomography(c, SimulatorBackend(), 10_000, np.random.default_rng(2))
    assert abs(tomo.state_fidelity(res.estimate, BELL) - (p + (1 - p) / 9)) < 0.01


def test_state_tomography_rejects_few_shots():
    with pytest.raises(ValueError):
        tomo.state_tomography(Circuit(2), SimulatorBackend(), 5)


def test_process_fidelity_formulas():
    ideal = unitary_to_ptm(CZ)
    assert np.isclose(tomo.process_fidelity(ideal, ideal), 1)
    for p in (0.9, 0.95):
        noisy = depolarizing_ptm(p, 2) @ ideal
        assert np.isclose(tomo.process_fidelity(noisy, ideal), (1 + 80 * p) / 81)
    other = unitary_to_ptm(CZDAG)
    brute = abs(np.trace(CZ.conj().T @ CZDAG)) ** 2 / 81
    f = tomo.process_fidelity(other, ideal)
    assert np.isclose(f, brute) and f < 1
    with pytest.raises(ValueError):
        tomo.process_fidelity(np.eye(81), np.eye(9))


def test_process_fidelity_basis_consistency():
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = unitary_to_ptm(haar_su9(rng))
        assert np.isclose(tomo.process_fidelity(r, r), 1)


def test_cptp_projection():
    rng = np.random.default_rng(4)
    j = ptm_to_choi(depolarizing_ptm(0.9, 2) @ unitary_to_ptm(CZ))
    h = rng.normal(size=(81, 81)) + 1j * rng.normal(size=(81, 81))
    x = tomo.project_cptp(j + 0.01 * (h + h.conj().T))
    assert np.linalg.eigvalsh(x).min() > -1e-9
    assert tomo.tp_defect(x) < 1e-6
    # already-CPTP input is a fixed point
    assert np.allclose(tomo.project_cptp(j), j, atol=1e-9)


def test_linear_inversion_exact_probabilities():
    u = haar_su9(np.random.default_rng(5))
    kraus = [np.sqrt(0.8) * u, np.sqrt(0.2) * np.eye(9)]
    j = choi_from_kraus(kraus)
    probs = tomo._process_probs(j, tomo._prep_states(), tomo.povm_elements())
    est = tomo.linear_inversion_process(probs * 1e6)
    assert np.allclose(est, j, atol=1e-10)
    assert np.allclose(tomo.choi_to_ptm(est), channel_to_ptm(kraus), atol=1e-10)


def test_process_tomography_identity():
    res = tomo.process_tomography(Circuit(2), SimulatorBackend(), 2000, np.random.default_rng(6),
                                  max_iter=300)
    assert np.max(np.abs(res.estimate - np.eye(81))) < 0.01
    assert np.all(np.diff(res.loglik_trace) >= 0)
    assert res.diagnostics["choi_min_eigenvalue"] > -1e-6
    assert res.diagnostics["tp_defect"] < 1e-6


def test_process_tomography_depolarizing_diag():
    p = 0.9
    circ = Circuit(2, [Gate("DepolarizeChannel", (0, 1), (p,))])
    res = tomo.process_tomography(circ, SimulatorBackend(), 2000, np.random.default_rng(7),
                                  max_iter=300)
    expected = depolarizing_ptm(p, 2)
    assert np.max(np.abs(np.diag(res.estimate) - np.diag(expected))) < 0.02


def test_process_tomography_czdag_noiseless():
    res = tomo.process_tomography(Circuit(2, [Gate("CZdag", (0, 1))]), SimulatorBackend(), 4000,
                                  np.random.default_rng(8), max_iter=300)
    assert tomo.process_fidelity(res.estimate, unitary_to_ptm(CZDAG)) >= 0.995


def test_process_tomography_rejects_few_shots():
    with pytest.raises(ValueError):
        tomo.process_tomography(Circuit(2), SimulatorBackend(), 5)


def test_reconstruction_json():
    psi = np.zeros(9)
    psi[0] = 1
    probs = np.einsum("soij,i,j->so", tomo.povm_elements(), psi, psi).real
    res = tomo.mle_state(np.round(probs * 1000).astype(int))
    text = res.to_json()
    assert '"shape": [9, 9]' in text
