"""Ancilla-purity eigenstate witness by several routes.

An ancilla on qubit 0 starts in |+>, a controlled evolution acts on the
system register (qubits 1..N), and the witness is the purity of the ancilla's
reduced 2x2 density matrix. For a pure system state and unitary evolution U
the witness equals 1/2 + |<psi|U|psi>|^2 / 2; for U = exp(iHt) it is bounded
below by the eigenspace participation ratio of |psi>.

The exact-evolution circuit route applies exp(-iHt) on the controlled branch,
so the ancilla coherence carries phases exp(+i*lambda_n*t); purity does not
depend on that sign choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import PauliHamiltonian
from .noise import (
    DensityMatrix,
    NoiseModel,
    simulate_density,
    simulate_trajectories,
)
from .spectra import EigenDecomposition, eigenbasis_weights
from .statevec import Circuit, Gate, shift_qubits, simulate


@dataclass(frozen=True)
class AncillaState:
    """Single-qubit density matrix [[a, b], [conj(b), 1-a]]."""

    a: float
    b: complex

    def __post_init__(self) -> None:
        if not -1e-9 <= self.a <= 1.0 + 1e-9:
            raise ValueError(f"population a={self.a} outside [0, 1]")
        if abs(self.b) > math.sqrt(max(self.a * (1.0 - self.a), 0.0)) + 1e-9:
            raise ValueError("coherence |b| violates positivity")

    @property
    def purity(self) -> float:
        return self.a**2 + (1.0 - self.a) ** 2 + 2.0 * abs(self.b) ** 2

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [np.conj(self.b), 1.0 - self.a]], dtype=complex)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "AncillaState":
        m = np.asarray(m)
        return cls(float(np.real(m[0, 0])), complex(m[0, 1]))

    @classmethod
    def from_state(cls, psi_full: np.ndarray) -> "AncillaState":
        """Reduced ancilla matrix of a pure state with the ancilla on qubit 0."""
        rows = np.asarray(psi_full).reshape(2, -1)
        a = float(np.real(np.vdot(rows[0], rows[0])))
        b = complex(rows[0] @ rows[1].conj())
        return cls(a, b)

    @classmethod
    def from_density(cls, rho: DensityMatrix | np.ndarray) -> "AncillaState":
        m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
        half = m.shape[0] // 2
        a = float(np.real(np.trace(m[:half, :half])))
        b = complex(np.trace(m[:half, half:]))
        return cls(a, b)


@dataclass(frozen=True)
class WitnessResult:
    r: float
    t: float | None
    route: str
    ancilla: AncillaState | None = None
    stderr: float | None = None
    clipped: bool = False


def witness_exact(psi: np.ndarray, eig: EigenDecomposition, t: float) -> WitnessResult:
    """Spectral formula: r = 1/2 + |sum_n |<n|psi>|^2 exp(i*lambda_n*t)|^2 / 2."""
    weights = eigenbasis_weights(psi, eig)
    z = complex(np.sum(weights * np.exp(1j * eig.eigenvalues * t)))
    ancilla = AncillaState(0.5, z / 2.0)
    return WitnessResult(ancilla.purity, t, "exact", ancilla=ancilla)


def exact_evolution(h: PauliHamiltonian, t: float, sign: float = -1.0,
                    max_qubits: int = 12) -> np.ndarray:
    """Dense exp(sign * i * H * t) on the full register."""
    dense = h.dense(max_qubits)
    vals, vecs = np.linalg.eigh(dense)
    phases = np.exp(sign * 1j * vals * t)
    return (vecs * phases) @ vecs.conj().T


def _plus_times(psi_sys: np.ndarray) -> np.ndarray:
    psi_sys = np.asarray(psi_sys, dtype=complex)
    return np.concatenate([psi_sys, psi_sys]) / math.sqrt(2.0)


def _evolution_circuit(evolution: Circuit | np.ndarray, n_sites: int) -> Circuit:
    if isinstance(evolution, Circuit):
        if evolution.n_qubits != n_sites + 1:
            raise ValueError(
                f"evolution circuit acts on {evolution.n_qubits} qubits, expected {n_sites + 1}"
            )
        if evolution.n_params:
            raise ValueError("evolution circuit must have bound parameters")
        return evolution
    u = np.asarray(evolution, dtype=complex)
    if u.shape != (2**n_sites, 2**n_sites):
        raise ValueError(f"evolution matrix shape {u.shape} does not match {n_sites} sites")
    gate = Gate(
        "unitary",
        tuple(range(1, n_sites + 1)),
        control=0,
        matrix=u,
        hw_two_qubit=0,  # exact black box: carries no hardware noise
    )
    return Circuit(n_sites + 1, (gate,), 0)


def _measure_ancilla(
    circuit: Circuit,
    psi0_full: np.ndarray,
    t: float | None,
    engine: str,
    nm: NoiseModel | None,
    n_traj: int,
    seed: int,
) -> WitnessResult:
    if engine == "statevec":
        if nm is not None and nm.p > 0.0:
            raise ValueError("the statevector engine is noiseless; use density or trajectory")
        psi = simulate(circuit, psi0_full)
        ancilla = AncillaState.from_state(psi)
        return WitnessResult(ancilla.purity, t, "circuit", ancilla=ancilla)
    if engine == "density":
        rho = simulate_density(circuit, DensityMatrix.from_state(psi0_full), nm)
        ancilla = AncillaState.from_density(rho)
        return WitnessResult(ancilla.purity, t, "density", ancilla=ancilla)
    if engine == "trajectory":
        if nm is None:
            raise ValueError("the trajectory engine needs a noise model")
        ensemble = simulate_trajectories(
            circuit, psi0_full, nm, n_traj, seed=seed, reduce="ancilla"
        )
        mean = ensemble.mean_ancilla()
        ancilla = AncillaState.from_matrix(mean)
        stderr = _trajectory_purity_stderr(ensemble.ancilla_matrices)
        return WitnessResult(ancilla.purity, t, "trajectory", ancilla=ancilla, stderr=stderr)
    raise ValueError(f"unknown engine {engine!r}")


def _trajectory_purity_stderr(matrices: np.ndarray) -> float:
    """Delta-method error of purity(mean matrix) from per-trajectory spread."""
    n = matrices.shape[0]
    if n < 2:
        return float("nan")
    samples = np.stack(
        [
            np.real(matrices[:, 0, 0]),
            np.real(matrices[:, 0, 1]),
            np.imag(matrices[:, 0, 1]),
        ],
        axis=1,
    )
    mean = samples.mean(axis=0)
    grad = np.array([4.0 * mean[0] - 2.0, 4.0 * mean[1], 4.0 * mean[2]])
    cov = np.cov(samples, rowvar=False)
    return float(np.sqrt(max(grad @ cov @ grad, 0.0) / n))


def witness_circuit(
    psi: np.ndarray,
    evolution: Circuit | np.ndarray,
    t: float | None = None,
    engine: str = "statevec",
    nm: NoiseModel | None = None,
    n_traj: int = 2000,
    seed: int = 0,
) -> WitnessResult:
    """Interferometric witness of a pure system state: build
    (|0>|psi> + |1>U|psi>)/sqrt(2) and return the ancilla purity.

    ``evolution`` is either a dense unitary on the system register or an
    (N+1)-qubit circuit that already addresses the ancilla on qubit 0.
    """
    psi = np.asarray(psi, dtype=complex)
    n_sites = psi.shape[0].bit_length() - 1
    if psi.shape[0] != 2**n_sites:
        raise ValueError("system state dimension is not a power of two")
    circuit = _evolution_circuit(evolution, n_sites)
    return _measure_ancilla(circuit, _plus_times(psi), t, engine, nm, n_traj, seed)


def witness_with_preparation(
    system_circuit: Circuit,
    evolution: Circuit | np.ndarray,
    t: float | None = None,
    engine: str = "density",
    nm: NoiseModel | None = None,
    n_traj: int = 2000,
    seed: int = 0,
) -> WitnessResult:
    """Witness of the full pipeline: the (bound) system circuit runs inside the
    noisy register alongside the ancilla, then the controlled evolution acts.
    This is the route where state-preparation noise accumulates with depth."""
    if system_circuit.n_params:
        raise ValueError("bind the system circuit's parameters first")
    n_sites = system_circuit.n_qubits
    full = shift_qubits(system_circuit, 1, n_sites + 1)
    ev = _evolution_circuit(evolution, n_sites)
    combined = Circuit(n_sites + 1, full.gates + ev.gates, 0)
    psi0 = np.zeros(2 ** (n_sites + 1), dtype=complex)
    psi0[0] = 1.0 / math.sqrt(2.0)
    psi0[2**n_sites] = 1.0 / math.sqrt(2.0)
    return _measure_ancilla(combined, psi0, t, engine, nm, n_traj, seed)


def witness_noisy_analytic(state: AncillaState, p: float, n_gates: int) -> WitnessResult:
    """Purity after the accumulated-noise rescaling
    rho -> (1-p_eff)*rho + p_eff*I/2 with p_eff = n_gates * p."""
    p_eff = float(n_gates) * p
    if not 0.0 <= p_eff <= 1.0:
        raise ValueError(f"effective strength p_eff={p_eff} outside [0, 1]")
    rescaled = AncillaState(
        (1.0 - p_eff) * state.a + p_eff / 2.0,
        (1.0 - p_eff) * state.b,
    )
    return WitnessResult(rescaled.purity, None, "noisy_analytic", ancilla=rescaled)


def _haar_unitary_2(rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def estimate_r_randomized(
    state: AncillaState,
    n_bases: int,
    n_shots: int,
    seed: int = 0,
) -> WitnessResult:
    """Purity from computational-basis statistics in Haar-random single-qubit
    bases, using unbiased second-moment estimators for the probabilities.

    For one qubit the Hamming-distance pairing reduces to
    r_est = 2 * (P0^2 + P1^2 - P0*P1) averaged over bases, with each product
    replaced by its finite-shot unbiased counterpart.
    """
    if n_bases < 2:
        raise ValueError("need at least two measurement bases")
    if n_shots < 2:
        raise ValueError("the unbiased second-moment estimator needs n_shots >= 2")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rho = state.matrix
    s = float(n_shots)
    estimates = np.empty(n_bases)
    for k in range(n_bases):
        v = _haar_unitary_2(rng)
        p0 = float(np.real((v @ rho @ v.conj().T)[0, 0]))
        p0 = min(max(p0, 0.0), 1.0)
        counts = rng.binomial(n_shots, p0)
        f0 = counts / s
        f1 = 1.0 - f0
        sq0 = (s * f0 * f0 - f0) / (s - 1.0)
        sq1 = (s * f1 * f1 - f1) / (s - 1.0)
        cross = s / (s - 1.0) * f0 * f1
        estimates[k] = 2.0 * (sq0 + sq1 - cross)
    stderr = float(estimates.std(ddof=1) / math.sqrt(n_bases))
    return WitnessResult(float(estimates.mean()), None, "randomized", stderr=stderr)


def estimate_r_tomography(
    state: AncillaState,
    shots_per_axis: int | None,
    seed: int = 0,
) -> WitnessResult:
    """Purity of the single-qubit matrix reconstructed from sampled x/y/z
    expectations: a = (<z>+1)/2, b = <x>/2 + i*<y>/2. ``shots_per_axis=None``
    uses the exact expectations. Unphysical reconstructions (Bloch length > 1)
    are clipped to the Bloch sphere and flagged."""
    exact = np.array([2.0 * state.b.real, 2.0 * state.b.imag, 2.0 * state.a - 1.0])
    if shots_per_axis is None:
        sampled = exact
    else:
        if shots_per_axis < 1:
            raise ValueError("shots_per_axis must be >= 1")
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        sampled = np.empty(3)
        for i, e in enumerate(exact):
            p_up = min(max((1.0 + e) / 2.0, 0.0), 1.0)
            ups = rng.binomial(shots_per_axis, p_up)
            sampled[i] = 2.0 * ups / shots_per_axis - 1.0
    length = float(np.linalg.norm(sampled))
    clipped = length > 1.0
    if clipped:
        sampled = sampled / length
    a = (sampled[2] + 1.0) / 2.0
    b = complex(sampled[0] / 2.0, sampled[1] / 2.0)
    ancilla = AncillaState(float(a), b)
    return WitnessResult(ancilla.purity, None, "tomography", ancilla=ancilla, clipped=clipped)
