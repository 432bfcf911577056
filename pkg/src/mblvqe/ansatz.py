"""Circuit constructors: input-state preparation, the polarization-conserving
variational blocks, bond-wise Trotterized evolution and the hardware-efficient
compilation ansatz.

Circuits that carry an ancilla place it on qubit 0 and shift all chain sites
to qubits 1..N.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .hamiltonian import AAParams, bonds, field_coefficients
from .statevec import Circuit, Gate


@dataclass(frozen=True)
class AnsatzConfig:
    n_sites: int
    depth_vqe: int
    theta0: float = 0.4
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("n_sites must be an even integer >= 2")
        if self.depth_vqe < 0:
            raise ValueError("depth_vqe must be >= 0")


@dataclass(frozen=True)
class TrotterPlan:
    params: AAParams
    t: float
    n_slices: int = 1
    controlled: bool = False

    def __post_init__(self) -> None:
        if self.n_slices < 1:
            raise ValueError("n_slices must be >= 1")


def ring_bonds(n_sites: int) -> tuple[tuple[int, int], ...]:
    """Entangler-layer bond pattern: a ring, deduplicated at N=2."""
    pairs = [(i, i + 1) for i in range(n_sites - 1)]
    if n_sites > 2:
        pairs.append((n_sites - 1, 0))
    return tuple(pairs)


def antiferromagnetic_index(n_sites: int) -> int:
    """Basis index of |0101...> (site 0 most significant)."""
    return int("01" * (n_sites // 2), 2)


def preparation_circuit(cfg: AnsatzConfig) -> Circuit:
    """|00...0> -> alternating product state -> one entangler layer where every
    bond shares the single fixed weight theta0."""
    gates = [Gate("x", (q,)) for q in range(1, cfg.n_sites, 2)]
    gates += [Gate("xy", pair, value=cfg.theta0) for pair in ring_bonds(cfg.n_sites)]
    return Circuit(cfg.n_sites, tuple(gates), 0)


def pqc(cfg: AnsatzConfig) -> Circuit:
    """depth_vqe blocks of per-bond entanglers (independent weights) followed by
    one Rz per site; all gates conserve the total Z polarization."""
    gates: list[Gate] = []
    p = 0
    for _ in range(cfg.depth_vqe):
        for pair in ring_bonds(cfg.n_sites):
            gates.append(Gate("xy", pair, param=p))
            p += 1
        for q in range(cfg.n_sites):
            gates.append(Gate("rz", (q,), param=p))
            p += 1
    return Circuit(cfg.n_sites, tuple(gates), p)


def initial_parameters(circuit: Circuit, init_scale: float, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-init_scale, init_scale, circuit.n_params)


_XX = np.array([[0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0], [1, 0, 0, 0]], dtype=complex)
_YY = np.array([[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex)
_ZZ = np.diag([1.0, -1.0, -1.0, 1.0]).astype(complex)
_ZI = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
_IZ = np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)

# hardware cost of one ancilla-controlled bond unitary: 3 CCNOTs at 6 CNOTs
# each plus 15 controlled one-qubit gates
CONTROLLED_BOND_TWO_QUBIT_GATES = 33


def bond_generator(v0: float, field_i: float, field_j: float) -> np.ndarray:
    """Two-site piece XX + YY + v0*ZZ + field_i*Z_i + field_j*Z_j."""
    return _XX + _YY + v0 * _ZZ + field_i * _ZI + field_j * _IZ


def _bond_field_weights(params: AAParams) -> dict[tuple[int, int], tuple[float, float]]:
    """Each site's field is split evenly over the bonds containing it, so the
    bond terms sum to the full Hamiltonian for either boundary."""
    blist = bonds(params)
    fields = field_coefficients(params)
    touches = np.zeros(params.n_sites, dtype=int)
    for i, j in blist:
        touches[i] += 1
        touches[j] += 1
    share = fields / touches
    return {(i, j): (float(share[i]), float(share[j])) for i, j in blist}


def trotter_step(plan: TrotterPlan) -> Circuit:
    """Product of bond-wise exponentials exp(+i*H_bond*t/n_slices), repeated
    n_slices times; with ``controlled`` each bond unitary is conditioned on an
    ancilla at qubit 0 and accounts for 33 hardware two-qubit gates."""
    params = plan.params
    n = params.n_sites
    tau = plan.t / plan.n_slices
    weights = _bond_field_weights(params)
    offset = 1 if plan.controlled else 0
    gates: list[Gate] = []
    for _ in range(plan.n_slices):
        for (i, j), (wi, wj) in weights.items():
            u = expm(1j * tau * bond_generator(params.v0, wi, wj))
            gates.append(
                Gate(
                    "unitary",
                    (i + offset, j + offset),
                    control=0 if plan.controlled else None,
                    matrix=u,
                    hw_two_qubit=CONTROLLED_BOND_TWO_QUBIT_GATES if plan.controlled else 1,
                )
            )
    return Circuit(n + offset, tuple(gates), 0)


def hardware_efficient_ansatz(n_qubits: int, depth: int) -> Circuit:
    """depth layers of Rz*Ry*Rz on every qubit followed by a CZ ladder over
    neighbouring qubits; 3*n_qubits parameters per layer."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    gates: list[Gate] = []
    p = 0
    for _ in range(depth):
        for q in range(n_qubits):
            gates.append(Gate("rz", (q,), param=p))
            gates.append(Gate("ry", (q,), param=p + 1))
            gates.append(Gate("rz", (q,), param=p + 2))
            p += 3
        for q in range(n_qubits - 1):
            gates.append(Gate("cz", (q, q + 1)))
    return Circuit(n_qubits, tuple(gates), p)


def hardware_two_qubit_count(circuit: Circuit) -> int:
    return sum(g.hw_two_qubit for g in circuit.gates)
