"""Gate-list circuit representation and a dense statevector engine.

Qubit 0 is the most significant bit of a basis index (matching the site
convention of :mod:`mblvqe.hamiltonian`). States are complex arrays of
length 2**n_qubits; every routine also accepts a (dim, batch) array and
acts on each column, which the density-matrix and compilation code rely on.

Gate semantics:

* ``x``       Pauli X on one qubit.
* ``rz``      exp(-i*theta*Z/2) = diag(exp(-i*theta/2), exp(+i*theta/2)).
* ``ry``      exp(-i*theta*Y/2).
* ``xy``      exp(i*pi*theta/4 * (XX + YY)): identity on |00>,|11> and
              [[cos(pi*theta/2), i*sin(pi*theta/2)],
               [i*sin(pi*theta/2), cos(pi*theta/2)]] on {|01>,|10>}.
* ``cz``      controlled Z (diagonal, symmetric in its two qubits).
* ``unitary`` a fixed dense matrix on ``targets``, optionally controlled.

Parameterized kinds carry either a ``param`` index into the circuit's flat
parameter vector or a fixed ``value``, never both.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

GATE_KINDS = ("x", "rz", "ry", "xy", "cz", "unitary")
_PARAM_KINDS = ("rz", "ry", "xy")


@dataclass(frozen=True, eq=False)
class Gate:
    kind: str
    targets: tuple[int, ...]
    control: int | None = None
    param: int | None = None
    value: float | None = None
    matrix: np.ndarray | None = None
    hw_two_qubit: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("duplicate target qubits")
        if self.control is not None and self.control in self.targets:
            raise ValueError("control qubit overlaps targets")
        if self.kind in ("x", "rz", "ry") and len(self.targets) != 1:
            raise ValueError(f"{self.kind} acts on exactly one qubit")
        if self.kind in ("xy", "cz") and len(self.targets) != 2:
            raise ValueError(f"{self.kind} acts on exactly two qubits")
        if self.kind in _PARAM_KINDS:
            if (self.param is None) == (self.value is None):
                raise ValueError(f"{self.kind} needs exactly one of param or value")
        elif self.param is not None or self.value is not None:
            raise ValueError(f"{self.kind} takes no angle")
        if self.kind == "unitary":
            if self.matrix is None:
                raise ValueError("unitary gate needs a matrix")
            d = 2 ** len(self.targets)
            m = np.array(self.matrix, dtype=complex)
            if m.shape != (d, d):
                raise ValueError(f"matrix shape {m.shape} does not match {d} target dims")
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        elif self.matrix is not None:
            raise ValueError(f"{self.kind} takes no matrix")
        if self.hw_two_qubit is None:
            n_involved = len(self.targets) + (self.control is not None)
            object.__setattr__(self, "hw_two_qubit", 1 if n_involved >= 2 else 0)

    @property
    def qubits(self) -> tuple[int, ...]:
        if self.control is None:
            return self.targets
        return (self.control,) + self.targets


@dataclass(frozen=True, eq=False)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...]
    n_params: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g.kind} addresses qubits outside 0..{self.n_qubits - 1}")
            if g.param is not None and not (0 <= g.param < self.n_params):
                raise ValueError(f"parameter reference {g.param} out of range")

    @property
    def number_conserving(self) -> bool:
        """True when every gate commutes with the total Z polarization."""
        return all(g.kind in ("rz", "xy", "cz") for g in self.gates)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


def concat(first: Circuit, second: Circuit) -> Circuit:
    """Run ``first`` then ``second``; the second circuit's parameter indices are
    shifted past the first's."""
    if first.n_qubits != second.n_qubits:
        raise ValueError("circuits act on different qubit counts")
    offset = first.n_params
    shifted = tuple(
        Gate(
            g.kind,
            g.targets,
            control=g.control,
            param=None if g.param is None else g.param + offset,
            value=g.value,
            matrix=g.matrix,
            hw_two_qubit=g.hw_two_qubit,
        )
        for g in second.gates
    )
    return Circuit(first.n_qubits, first.gates + shifted, offset + second.n_params)


def bind(circuit: Circuit, params: np.ndarray | None = None) -> Circuit:
    """Freeze all parameter references to numeric values."""
    params = _check_params(circuit, params)
    gates = tuple(
        Gate(
            g.kind,
            g.targets,
            control=g.control,
            value=_angle(g, params) if g.kind in _PARAM_KINDS else None,
            matrix=g.matrix,
            hw_two_qubit=g.hw_two_qubit,
        )
        for g in circuit.gates
    )
    return Circuit(circuit.n_qubits, gates, 0)


def shift_qubits(circuit: Circuit, offset: int, n_qubits: int) -> Circuit:
    """Relabel every qubit q -> q + offset inside a larger register."""
    gates = tuple(
        Gate(
            g.kind,
            tuple(t + offset for t in g.targets),
            control=None if g.control is None else g.control + offset,
            param=g.param,
            value=g.value,
            matrix=g.matrix,
            hw_two_qubit=g.hw_two_qubit,
        )
        for g in circuit.gates
    )
    return Circuit(n_qubits, gates, circuit.n_params)


@dataclass
class GradResult:
    value: float
    gradient: np.ndarray


@lru_cache(maxsize=None)
def _one_qubit_indices(n: int, q: int) -> tuple[np.ndarray, np.ndarray]:
    idx = np.arange(2**n)
    bit = (idx >> (n - 1 - q)) & 1
    i0, i1 = idx[bit == 0], idx[bit == 1]
    i0.setflags(write=False)
    i1.setflags(write=False)
    return i0, i1


@lru_cache(maxsize=None)
def _two_qubit_indices(n: int, q1: int, q2: int) -> tuple[np.ndarray, ...]:
    idx = np.arange(2**n)
    b1 = (idx >> (n - 1 - q1)) & 1
    b2 = (idx >> (n - 1 - q2)) & 1
    groups = tuple(idx[(2 * b1 + b2) == k] for k in range(4))
    for g in groups:
        g.setflags(write=False)
    return groups


def _n_qubits_of(psi: np.ndarray) -> int:
    dim = psi.shape[0]
    n = dim.bit_length() - 1
    if dim != 2**n:
        raise ValueError(f"state dimension {dim} is not a power of two")
    return n


def _check_params(circuit: Circuit, params: np.ndarray | None) -> np.ndarray | None:
    if circuit.n_params == 0:
        return None
    if params is None:
        raise ValueError(f"circuit has {circuit.n_params} parameters but none were given")
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got shape {params.shape}")
    return params


def _angle(gate: Gate, params: np.ndarray | None) -> float:
    if gate.param is not None:
        if params is None:
            raise ValueError("gate references a parameter but no parameter vector was given")
        return float(params[gate.param])
    return float(gate.value)


def gate_matrix(gate: Gate, params: np.ndarray | None = None) -> np.ndarray:
    """Unitary on the gate's target space (controls are not included)."""
    if gate.kind == "x":
        return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    if gate.kind == "rz":
        theta = _angle(gate, params)
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    if gate.kind == "ry":
        theta = _angle(gate, params)
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)
    if gate.kind == "xy":
        theta = _angle(gate, params)
        c = math.cos(math.pi * theta / 2.0)
        s = math.sin(math.pi * theta / 2.0)
        return np.array(
            [
                [1.0, 0.0, 0.0, 0.0],
                [0.0, c, 1j * s, 0.0],
                [0.0, 1j * s, c, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ],
            dtype=complex,
        )
    if gate.kind == "cz":
        return np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)
    if gate.kind == "unitary":
        return np.array(gate.matrix)
    raise ValueError(f"unknown gate kind {gate.kind!r}")


def _apply_dense(psi: np.ndarray, targets: tuple[int, ...], u: np.ndarray,
                 control: int | None) -> np.ndarray:
    n = _n_qubits_of(psi)
    batch = psi.shape[1:]
    full = psi.reshape((2,) * n + batch)
    axes = list(targets) if control is None else [control, *targets]
    work = np.moveaxis(full, axes, range(len(axes))).copy()
    d = 2 ** len(targets)
    if control is None:
        flat = work.reshape(d, -1)
        work = (u @ flat).reshape(work.shape)
    else:
        sub = work[1].reshape(d, -1)
        work[1] = (u @ sub).reshape(work[1].shape)
    out = np.moveaxis(work, range(len(axes)), axes)
    return np.ascontiguousarray(out).reshape(psi.shape)


def apply_gate(
    psi: np.ndarray,
    gate: Gate,
    params: np.ndarray | None = None,
    dagger: bool = False,
) -> np.ndarray:
    """Apply one gate (or its inverse) to a state or a (dim, batch) stack."""
    n = _n_qubits_of(psi)
    kind = gate.kind
    if kind == "x":
        i0, i1 = _one_qubit_indices(n, gate.targets[0])
        out = np.empty_like(psi)
        out[i0] = psi[i1]
        out[i1] = psi[i0]
        return out
    if kind == "rz":
        theta = _angle(gate, params)
        if dagger:
            theta = -theta
        i0, i1 = _one_qubit_indices(n, gate.targets[0])
        out = psi.astype(complex, copy=True)
        out[i0] *= np.exp(-0.5j * theta)
        out[i1] *= np.exp(0.5j * theta)
        return out
    if kind == "ry":
        theta = _angle(gate, params)
        if dagger:
            theta = -theta
        c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
        i0, i1 = _one_qubit_indices(n, gate.targets[0])
        out = psi.astype(complex, copy=True)
        a, b = psi[i0], psi[i1]
        out[i0] = c * a - s * b
        out[i1] = s * a + c * b
        return out
    if kind == "xy":
        theta = _angle(gate, params)
        if dagger:
            theta = -theta
        c = math.cos(math.pi * theta / 2.0)
        s = math.sin(math.pi * theta / 2.0)
        _, i01, i10, _ = _two_qubit_indices(n, *gate.targets)
        out = psi.astype(complex, copy=True)
        a, b = psi[i01], psi[i10]
        out[i01] = c * a + 1j * s * b
        out[i10] = 1j * s * a + c * b
        return out
    if kind == "cz":
        _, _, _, i11 = _two_qubit_indices(n, *gate.targets)
        out = psi.astype(complex, copy=True)
        out[i11] = -out[i11]
        return out
    if kind == "unitary":
        u = gate.matrix.conj().T if dagger else gate.matrix
        return _apply_dense(psi.astype(complex, copy=False), gate.targets, u, gate.control)
    raise ValueError(f"unknown gate kind {kind!r}")


def _apply_generator(psi: np.ndarray, gate: Gate) -> np.ndarray:
    """A|psi> for a gate U(theta) = exp(theta*A); note dU/dtheta = U A, so the
    adjoint sweep can take the derivative after pulling states through U^dag."""
    n = _n_qubits_of(psi)
    out = np.zeros(psi.shape, dtype=complex)
    if gate.kind == "rz":
        i0, i1 = _one_qubit_indices(n, gate.targets[0])
        out[i0] = -0.5j * psi[i0]
        out[i1] = 0.5j * psi[i1]
        return out
    if gate.kind == "ry":
        i0, i1 = _one_qubit_indices(n, gate.targets[0])
        out[i0] = -0.5 * psi[i1]
        out[i1] = 0.5 * psi[i0]
        return out
    if gate.kind == "xy":
        _, i01, i10, _ = _two_qubit_indices(n, *gate.targets)
        factor = 0.5j * math.pi
        out[i01] = factor * psi[i10]
        out[i10] = factor * psi[i01]
        return out
    raise ValueError(f"gate kind {gate.kind!r} has no angle derivative")


def simulate(circuit: Circuit, psi0: np.ndarray, params: np.ndarray | None = None) -> np.ndarray:
    """Run the circuit on a state (or a (dim, batch) stack of states)."""
    psi0 = np.asarray(psi0)
    if psi0.shape[0] != circuit.dim:
        raise ValueError(f"state dimension {psi0.shape[0]} != 2**{circuit.n_qubits}")
    params = _check_params(circuit, params)
    psi = psi0.astype(complex, copy=True)
    for gate in circuit.gates:
        psi = apply_gate(psi, gate, params)
    return psi


def cost_and_grad(
    circuit: Circuit,
    psi0: np.ndarray,
    cost,
    params: np.ndarray | None = None,
) -> GradResult:
    """Exact gradient of a scalar cost of the output state via one reverse
    (adjoint) sweep through the gate list.

    ``cost`` must provide ``value_and_cotangent(psi) -> (value, lam)`` with
    dC = 2*Re<lam|d psi>; costs lacking that hook are rejected.
    """
    if not hasattr(cost, "value_and_cotangent"):
        raise TypeError("cost must expose value_and_cotangent(psi); got an unsupported cost")
    params = _check_params(circuit, params)
    psi = simulate(circuit, psi0, params)
    value, lam = cost.value_and_cotangent(psi)
    grad = np.zeros(circuit.n_params)
    if circuit.n_params == 0:
        return GradResult(float(value), grad)

    width = 1 if psi.ndim == 1 else psi.shape[1]
    stack = np.concatenate(
        [psi.reshape(psi.shape[0], -1), np.asarray(lam).reshape(psi.shape[0], -1)], axis=1
    )
    for gate in reversed(circuit.gates):
        stack = apply_gate(stack, gate, params, dagger=True)
        if gate.param is not None:
            dpsi = _apply_generator(stack[:, :width], gate)
            grad[gate.param] += 2.0 * float(np.real(np.vdot(stack[:, width:], dpsi)))
    return GradResult(float(value), grad)


def basis_state(n_qubits: int, index: int = 0) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def circuit_unitary(circuit: Circuit, params: np.ndarray | None = None,
                    max_qubits: int = 12) -> np.ndarray:
    """Dense matrix of the whole circuit, column by column."""
    if circuit.n_qubits > max_qubits:
        raise ValueError(f"refusing to build a dense unitary on {circuit.n_qubits} qubits")
    eye = np.eye(circuit.dim, dtype=complex)
    return simulate(circuit, eye, params)
