import numpy as np
import pytest

from mblvqe.ansatz import (
    CONTROLLED_BOND_TWO_QUBIT_GATES,
    AnsatzConfig,
    TrotterPlan,
    antiferromagnetic_index,
    hardware_efficient_ansatz,
    hardware_two_qubit_count,
    pqc,
    preparation_circuit,
    ring_bonds,
    trotter_step,
)
from mblvqe.hamiltonian import AAParams, build_hamiltonian, project_to_sector, sector_basis
from mblvqe.spectra import diagonalize, eipr
from mblvqe.statevec import basis_state, circuit_unitary, simulate
from mblvqe.vqe import input_state

from oracles import dense_expm, kron_hamiltonian, random_state


def test_preparation_zero_angle_is_alternating_state():
    cfg = AnsatzConfig(6, 0, theta0=0.0)
    psi = input_state(cfg)
    expected = basis_state(6, antiferromagnetic_index(6))
    assert np.allclose(psi, expected, atol=1e-14)


def test_preparation_state_in_sector_and_normalized():
    cfg = AnsatzConfig(8, 0, theta0=0.4)
    psi = input_state(cfg)
    assert abs(np.linalg.norm(psi) - 1.0) < 1e-12
    basis = sector_basis(8)
    outside = np.delete(psi, basis.states)
    assert np.abs(outside).max() == 0.0


def test_input_state_scan_matches_localization_phenomenology():
    # Over the entangling theta0 range at N=12: on the strongly quasiperiodic
    # side the scan peaks at theta0=1.0, the working point 0.4 sits well below
    # that peak, and its energy lands mid-spectrum. On the weak-field side
    # every input stays far from any eigenstate. theta0=0 is excluded: it is
    # the bare product state, a separate trivial channel.
    n = 12
    grid = [round(0.1 * k, 1) for k in range(1, 16)]
    basis = sector_basis(n)
    values = {}
    for w in (8.0, 1.5):
        eig = diagonalize(build_hamiltonian(AAParams(n, w)), basis)
        action = build_hamiltonian(AAParams(n, w)).action()
        curve = {}
        for theta0 in grid:
            psi = input_state(AnsatzConfig(n, 0, theta0=theta0))
            sector = project_to_sector(psi, basis)
            curve[theta0] = eipr(sector / np.linalg.norm(sector), eig)
            if theta0 == 0.4:
                energy = action.expectation(psi)
                span = eig.eigenvalues[-1] - eig.eigenvalues[0]
                fraction = (energy - eig.eigenvalues[0]) / span
                assert 0.2 < fraction < 0.8
        values[w] = curve
    mbl = values[8.0]
    assert max(mbl, key=mbl.get) == 1.0
    assert mbl[0.4] < mbl[1.0]
    assert max(values[1.5].values()) < 0.5
    assert mbl[0.4] < max(mbl.values())


def test_pqc_zero_parameters_is_identity():
    cfg = AnsatzConfig(6, 3)
    circuit = pqc(cfg)
    psi = random_state(2**6, np.random.default_rng(0))
    out = simulate(circuit, psi, np.zeros(circuit.n_params))
    assert np.allclose(out, psi, atol=1e-12)


def test_pqc_parameter_count():
    for n, depth in ((4, 1), (6, 3), (8, 5)):
        circuit = pqc(AnsatzConfig(n, depth))
        n_bonds = len(ring_bonds(n))
        assert circuit.n_params == depth * (n_bonds + n)
    assert pqc(AnsatzConfig(4, 0)).n_params == 0


def test_pqc_conserves_polarization_any_parameters():
    rng = np.random.default_rng(1)
    cfg = AnsatzConfig(6, 2)
    circuit = pqc(cfg)
    basis = sector_basis(6)
    psi = input_state(cfg)
    out = simulate(circuit, psi, rng.uniform(-np.pi, np.pi, circuit.n_params))
    assert np.abs(np.delete(out, basis.states)).max() == 0.0


def test_trotter_zero_time_identity():
    plan = TrotterPlan(AAParams(4, 3.0), 0.0)
    u = circuit_unitary(trotter_step(plan))
    assert np.allclose(u, np.eye(16), atol=1e-14)


@pytest.mark.parametrize("boundary", ["periodic", "open"])
def test_trotter_error_second_order(boundary):
    params = AAParams(4, 8.0, phi=0.3, boundary=boundary)
    h = build_hamiltonian(params)
    dense = kron_hamiltonian(h.terms, 4)
    w = 8.0
    errors = []
    ts = [0.4 / w, 0.2 / w, 0.1 / w, 0.05 / w]
    for t in ts:
        u_step = circuit_unitary(trotter_step(TrotterPlan(params, t, 1)))
        errors.append(np.linalg.norm(u_step - dense_expm(dense, t)))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all((ratios > 3.3) & (ratios < 4.7))


def test_trotter_converges_with_slices():
    params = AAParams(4, 5.0, phi=0.1)
    dense = kron_hamiltonian(build_hamiltonian(params).terms, 4)
    t = 0.8
    errors = []
    for slices in (2, 4, 8, 16):
        u = circuit_unitary(trotter_step(TrotterPlan(params, t, slices)))
        errors.append(np.linalg.norm(u - dense_expm(dense, t)))
    # first-order product formula: error ~ C / n_slices
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all(ratios > 1.7)


def test_controlled_trotter_gate_count():
    for n in (4, 6, 8):
        plan = TrotterPlan(AAParams(n, 2.0), 0.1, controlled=True)
        circuit = trotter_step(plan)
        assert hardware_two_qubit_count(circuit) == CONTROLLED_BOND_TWO_QUBIT_GATES * n


def test_controlled_trotter_inactive_on_zero_ancilla():
    rng = np.random.default_rng(2)
    plan = TrotterPlan(AAParams(4, 6.0, phi=0.2), 0.7, controlled=True)
    circuit = trotter_step(plan)
    sys = random_state(16, rng)
    psi = np.zeros(32, dtype=complex)
    psi[:16] = sys
    out = simulate(circuit, psi)
    assert np.abs(out[:16] - sys).max() < 1e-12
    assert np.abs(out[16:]).max() == 0.0


def test_controlled_trotter_active_branch_evolves():
    plan = TrotterPlan(AAParams(4, 6.0, phi=0.2), 0.7, controlled=True)
    controlled = circuit_unitary(trotter_step(plan))
    plain = circuit_unitary(trotter_step(TrotterPlan(AAParams(4, 6.0, phi=0.2), 0.7)))
    assert np.allclose(controlled[16:, 16:], plain, atol=1e-12)


def test_hardware_efficient_structure():
    for n, depth in ((3, 1), (5, 6)):
        circuit = hardware_efficient_ansatz(n, depth)
        assert circuit.n_params == depth * 3 * n
        cz_count = sum(1 for g in circuit.gates if g.kind == "cz")
        assert cz_count == depth * (n - 1)
    with pytest.raises(ValueError):
        hardware_efficient_ansatz(3, 0)


def test_hardware_efficient_zero_params_is_cz_ladders():
    n, depth = 3, 2
    circuit = hardware_efficient_ansatz(n, depth)
    u = circuit_unitary(circuit, np.zeros(circuit.n_params))
    ladder = np.eye(8, dtype=complex)
    for q in range(n - 1):
        cz = np.eye(8, dtype=complex)
        for idx in range(8):
            if (idx >> (n - 1 - q)) & 1 and (idx >> (n - 2 - q)) & 1:
                cz[idx, idx] = -1.0
        ladder = cz @ ladder
    expected = np.linalg.matrix_power(ladder, depth)
    assert np.allclose(u, expected, atol=1e-12)
    assert np.abs(u @ u.conj().T - np.eye(8)).max() < 1e-12
