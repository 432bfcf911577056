"""Two-qubit depolarizing noise and two mixed-state engines: exact density
matrices and Monte-Carlo trajectory sampling.

The channel on a qubit pair is uniform over the 15 non-identity two-qubit
Paulis: rho -> (1-p)*rho + (p/15) * sum_P P rho P. Equivalently
rho -> (1-16p/15)*rho + (16p/15)*(I/4 (x) Tr_pair rho), which is how the
density engine applies it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hamiltonian import ResourceLimitError
from .statevec import Circuit, Gate, apply_gate, _check_params, _one_qubit_indices

DENSITY_MAX_QUBITS = 9


@dataclass(frozen=True)
class NoiseModel:
    """Per-gate depolarizing strength and where the channels attach.

    ``per_hardware_gate`` inserts one channel per hardware two-qubit gate a
    circuit element accounts for (33 for an ancilla-controlled bond unitary);
    ``per_logical_gate`` inserts a single channel per multi-qubit gate.
    """

    p: float = 1e-3
    placement: str = "per_hardware_gate"
    kraus_convention: str = "uniform_pauli_15"

    def __post_init__(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if self.placement not in ("per_hardware_gate", "per_logical_gate"):
            raise ValueError(f"unknown placement {self.placement!r}")
        if self.kraus_convention != "uniform_pauli_15":
            raise ValueError("only the uniform 15-Pauli convention is implemented")


@dataclass(eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError("density matrix must be square")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    @classmethod
    def from_state(cls, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(np.outer(psi, psi.conj()))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def validate(self, tol_trace: float = 1e-10, tol_herm: float = 1e-12,
                 tol_psd: float = 1e-9) -> None:
        m = self.matrix
        if abs(np.trace(m) - 1.0) > tol_trace:
            raise ValueError(f"trace {np.trace(m)} deviates from 1")
        if np.abs(m - m.conj().T).max() > tol_herm:
            raise ValueError("matrix is not Hermitian")
        min_eig = float(np.linalg.eigvalsh(m).min())
        if min_eig < -tol_psd:
            raise ValueError(f"matrix has negative eigenvalue {min_eig}")


_P1 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# the 15 non-identity pair labels, in a fixed documented order
PAULI_PAIR_LABELS: tuple[tuple[str, str], ...] = tuple(
    (a, b) for a in "IXYZ" for b in "IXYZ"
)[1:]


def _mix_pair(rho: np.ndarray, n: int, pair: tuple[int, int]) -> np.ndarray:
    """I/4 (x) Tr_pair(rho): full replacement of the pair by the maximally
    mixed state."""
    q1, q2 = pair
    t = rho.reshape((2,) * (2 * n))
    w = np.moveaxis(t, (q1, q2, n + q1, n + q2), (0, 1, 2, 3))
    reduced = w[0, 0, 0, 0] + w[0, 1, 0, 1] + w[1, 0, 1, 0] + w[1, 1, 1, 1]
    mixed = np.zeros_like(w)
    for a in range(2):
        for b in range(2):
            mixed[a, b, a, b] = reduced / 4.0
    out = np.moveaxis(mixed, (0, 1, 2, 3), (q1, q2, n + q1, n + q2))
    return np.ascontiguousarray(out).reshape(rho.shape)


def _depolarize_pair(rho: np.ndarray, n: int, pair: tuple[int, int], p: float) -> np.ndarray:
    gamma = 16.0 * p / 15.0
    return (1.0 - gamma) * rho + gamma * _mix_pair(rho, n, pair)


def apply_depolarizing(rho: DensityMatrix, qubits: tuple[int, int], p: float) -> DensityMatrix:
    """Uniform two-qubit depolarizing channel of strength p on the given pair."""
    q1, q2 = qubits
    if q1 == q2:
        raise ValueError("depolarizing channel needs two distinct qubits")
    n = rho.n_qubits
    if not (0 <= q1 < n and 0 <= q2 < n):
        raise ValueError(f"qubit pair {qubits} outside register of {n} qubits")
    return DensityMatrix(_depolarize_pair(rho.matrix, n, (q1, q2), p))


def depolarize_qubit(rho: DensityMatrix, qubit: int, prob: float) -> DensityMatrix:
    """Single-qubit replacement channel rho -> (1-prob)*rho + prob*(I/2 (x) Tr_q rho)."""
    n = rho.n_qubits
    t = rho.matrix.reshape((2,) * (2 * n))
    w = np.moveaxis(t, (qubit, n + qubit), (0, 1))
    reduced = w[0, 0] + w[1, 1]
    mixed = np.zeros_like(w)
    mixed[0, 0] = reduced / 2.0
    mixed[1, 1] = reduced / 2.0
    out = np.moveaxis(mixed, (0, 1), (qubit, n + qubit))
    out = np.ascontiguousarray(out).reshape(rho.matrix.shape)
    return DensityMatrix((1.0 - prob) * rho.matrix + prob * out)


def channel_pairs(gate: Gate, nm: NoiseModel | None) -> list[tuple[int, int]]:
    """Qubit pairs that receive one depolarizing application each after the gate."""
    if nm is None or nm.p == 0.0 or gate.hw_two_qubit == 0:
        return []
    if gate.control is not None and len(gate.targets) == 2:
        c = gate.control
        i, j = gate.targets
        if nm.placement == "per_logical_gate":
            return [(i, j)]
        cycle = [(c, i), (i, j), (c, j)]
        return [cycle[m % 3] for m in range(gate.hw_two_qubit)]
    qubits = gate.qubits
    if len(qubits) == 2:
        count = gate.hw_two_qubit if nm.placement == "per_hardware_gate" else 1
        return [tuple(qubits)] * count
    return []


def _conjugate_gate(rho: np.ndarray, gate: Gate, params: np.ndarray | None) -> np.ndarray:
    """U rho U^dag using the statevector kernels column-wise on both sides."""
    left = apply_gate(rho, gate, params)
    right = apply_gate(np.ascontiguousarray(left.conj().T), gate, params)
    return np.ascontiguousarray(right.conj().T)


def simulate_density(
    circuit: Circuit,
    rho0: DensityMatrix | np.ndarray,
    nm: NoiseModel | None = None,
    params: np.ndarray | None = None,
    max_qubits: int = DENSITY_MAX_QUBITS,
) -> DensityMatrix:
    """Exact mixed-state evolution: every gate acts as U rho U^dag, channels
    attach after multi-qubit gates per the noise model's placement."""
    if circuit.n_qubits > max_qubits:
        raise ResourceLimitError(
            f"density simulation of {circuit.n_qubits} qubits exceeds the "
            f"{max_qubits}-qubit limit"
        )
    params = _check_params(circuit, params)
    rho = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0, dtype=complex)
    if rho.shape != (circuit.dim, circuit.dim):
        raise ValueError(f"density matrix shape {rho.shape} != circuit dimension {circuit.dim}")
    rho = rho.astype(complex, copy=True)
    n = circuit.n_qubits
    for gate in circuit.gates:
        rho = _conjugate_gate(rho, gate, params)
        for pair in channel_pairs(gate, nm):
            rho = _depolarize_pair(rho, n, pair, nm.p)
    return DensityMatrix(rho)


def _apply_pauli(psi: np.ndarray, label: str, qubit: int) -> np.ndarray:
    n = psi.shape[0].bit_length() - 1
    i0, i1 = _one_qubit_indices(n, qubit)
    out = psi.copy()
    if label == "X":
        out[i0], out[i1] = psi[i1], psi[i0]
    elif label == "Y":
        out[i0] = -1j * psi[i1]
        out[i1] = 1j * psi[i0]
    elif label == "Z":
        out[i1] = -psi[i1]
    return out


@dataclass(eq=False)
class TrajectoryEnsemble:
    """Pure-state unravelling of the depolarizing evolution; the ensemble mean
    of any observable is an unbiased estimate of the density-engine value."""

    n_trajectories: int
    seed: int
    states: np.ndarray | None = None
    ancilla_matrices: np.ndarray | None = None

    def mean_ancilla(self) -> np.ndarray:
        if self.ancilla_matrices is None:
            raise ValueError("ensemble was not reduced to ancilla matrices")
        return self.ancilla_matrices.mean(axis=0)


def _ancilla_entries(psi: np.ndarray) -> np.ndarray:
    rows = psi.reshape(2, -1)
    a = float(np.real(np.vdot(rows[0], rows[0])))
    b = complex(rows[0] @ rows[1].conj())
    return np.array([[a, b], [np.conj(b), 1.0 - a]], dtype=complex)


def simulate_trajectories(
    circuit: Circuit,
    psi0: np.ndarray,
    nm: NoiseModel,
    n_traj: int,
    seed: int = 0,
    params: np.ndarray | None = None,
    reduce: str = "states",
) -> TrajectoryEnsemble:
    """Sample Kraus branches per channel slot: identity with probability 1-p,
    otherwise one of 15 Pauli pairs uniformly. Pauli branches are unitary, so
    no renormalization is needed. Deterministic per seed."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if reduce not in ("states", "ancilla"):
        raise ValueError(f"unknown reduction {reduce!r}")
    params = _check_params(circuit, params)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (circuit.dim,):
        raise ValueError(f"state shape {psi0.shape} != ({circuit.dim},)")

    slots = [(gate, channel_pairs(gate, nm)) for gate in circuit.gates]
    children = np.random.SeedSequence(seed).spawn(n_traj)
    states = np.empty((n_traj, circuit.dim), dtype=complex) if reduce == "states" else None
    ancillas = np.empty((n_traj, 2, 2), dtype=complex) if reduce == "ancilla" else None

    for k in range(n_traj):
        rng = np.random.default_rng(children[k])
        psi = psi0.copy()
        for gate, pairs in slots:
            psi = apply_gate(psi, gate, params)
            for q1, q2 in pairs:
                if rng.random() < nm.p:
                    a, b = PAULI_PAIR_LABELS[rng.integers(15)]
                    if a != "I":
                        psi = _apply_pauli(psi, a, q1)
                    if b != "I":
                        psi = _apply_pauli(psi, b, q2)
        if states is not None:
            states[k] = psi
        if ancillas is not None:
            ancillas[k] = _ancilla_entries(psi)

    return TrajectoryEnsemble(n_traj, seed, states=states, ancilla_matrices=ancillas)
