"""Variational compilation of the controlled time-evolution unitary into a
shallow hardware-efficient circuit via the trace-overlap cost."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ansatz import hardware_efficient_ansatz
from .hamiltonian import AAParams, ResourceLimitError, build_hamiltonian
from .optim import NonFiniteCostError, minimize_adam
from .statevec import Circuit, cost_and_grad, simulate
from .witness import exact_evolution

COMPILE_MAX_QUBITS = 10


@dataclass(frozen=True, eq=False)
class CompileProblem:
    target: np.ndarray
    ansatz_depth: int
    seed: int = 0
    max_iters: int = 2000
    fidelity_goal: float = 0.999
    n_restarts: int = 20
    learning_rate: float = 0.05
    init_scale: float = math.pi

    def __post_init__(self) -> None:
        target = np.asarray(self.target, dtype=complex)
        if target.ndim != 2 or target.shape[0] != target.shape[1]:
            raise ValueError("target must be a square matrix")
        d = target.shape[0]
        if d & (d - 1):
            raise ValueError("target dimension must be a power of two")
        deviation = np.abs(target @ target.conj().T - np.eye(d)).max()
        if deviation > 1e-10:
            raise ValueError(f"target is not unitary (deviation {deviation:.2e})")
        object.__setattr__(self, "target", target)
        if self.ansatz_depth < 1:
            raise ValueError("ansatz_depth must be >= 1")

    @property
    def n_qubits(self) -> int:
        return self.target.shape[0].bit_length() - 1


@dataclass
class CompileResult:
    params: np.ndarray
    fidelity: float
    cost_trace: np.ndarray = field(repr=False)
    circuit: Circuit | None = None
    restart_index: int = 0


def build_target(params: AAParams, t: float, max_qubits: int = COMPILE_MAX_QUBITS) -> np.ndarray:
    """Block-diagonal controlled evolution diag(I, exp(iHt)) with the ancilla
    on the most significant qubit."""
    if params.n_sites + 1 > max_qubits:
        raise ResourceLimitError(
            f"controlled evolution on {params.n_sites + 1} qubits exceeds the "
            f"{max_qubits}-qubit limit"
        )
    h = build_hamiltonian(params)
    u = exact_evolution(h, t, sign=+1.0)
    dim = u.shape[0]
    target = np.zeros((2 * dim, 2 * dim), dtype=complex)
    target[:dim, :dim] = np.eye(dim)
    target[dim:, dim:] = u
    return target


class TraceOverlapCost:
    """C(theta) = -|Tr(U(theta) V^dag)| / d, evaluated by simulating the ansatz
    on the columns of V^dag; minimum -1 exactly when U matches V up to phase."""

    def __init__(self, target: np.ndarray):
        self.dim = target.shape[0]
        self.initial = np.ascontiguousarray(target.conj().T)

    def value(self, batch: np.ndarray) -> float:
        return -abs(np.trace(batch)) / self.dim

    def value_and_cotangent(self, batch: np.ndarray) -> tuple[float, np.ndarray]:
        tr = complex(np.trace(batch))
        mag = abs(tr)
        value = -mag / self.dim
        lam = np.zeros_like(batch)
        if mag > 1e-300:
            # dC = 2 Re <lam|dPsi> with lam supported on the diagonal
            np.fill_diagonal(lam, -tr / (2.0 * mag * self.dim))
        return value, lam


def fidelity(circuit: Circuit, params: np.ndarray, target: np.ndarray) -> float:
    """|Tr(U(theta) V^dag)| / d via column simulation."""
    batch = simulate(circuit, np.ascontiguousarray(target.conj().T), params)
    return float(abs(np.trace(batch)) / target.shape[0])


def compile_evolution(problem: CompileProblem) -> CompileResult:
    """Best-of-n_restarts gradient minimization of the trace-overlap cost."""
    circuit = hardware_efficient_ansatz(problem.n_qubits, problem.ansatz_depth)
    cost = TraceOverlapCost(problem.target)

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        res = cost_and_grad(circuit, cost.initial, cost, x)
        return res.value, res.gradient

    best: CompileResult | None = None
    for k in range(problem.n_restarts):
        rng = np.random.default_rng(np.random.SeedSequence([problem.seed, k]))
        x0 = rng.uniform(-problem.init_scale, problem.init_scale, circuit.n_params)
        try:
            opt = minimize_adam(
                objective,
                x0,
                learning_rate=problem.learning_rate,
                max_iters=problem.max_iters,
                grad_tol=1e-10,
                fun_tol=-problem.fidelity_goal,
            )
        except NonFiniteCostError:
            continue
        result = CompileResult(
            params=opt.x,
            fidelity=-opt.fun,
            cost_trace=opt.trace,
            circuit=circuit,
            restart_index=k,
        )
        if best is None or result.fidelity > best.fidelity:
            best = result
        if best.fidelity >= problem.fidelity_goal:
            break
    if best is None:
        raise NonFiniteCostError("every compilation restart produced a non-finite cost")
    return best
