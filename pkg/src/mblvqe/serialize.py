"""Line-oriented text format for circuits.

First line: ``qubits N``. Then one gate per line: the kind, the target qubit
indices and, for parameterized kinds, the bound angle, e.g.::

    qubits 4
    x 1
    xy 0 1 0.4
    rz 2 -0.125
    cz 2 3

Only bound circuits of the named gate kinds serialize; dense matrix gates do
not fit the format and are rejected.
"""

from __future__ import annotations

from .statevec import Circuit, Gate

_N_TARGETS = {"x": 1, "rz": 1, "ry": 1, "xy": 2, "cz": 2}
_WITH_ANGLE = ("rz", "ry", "xy")


def circuit_to_text(circuit: Circuit, params=None) -> str:
    lines = [f"qubits {circuit.n_qubits}"]
    for g in circuit.gates:
        if g.kind not in _N_TARGETS or g.control is not None:
            raise ValueError(f"gate kind {g.kind!r} has no text representation")
        entry = [g.kind, *map(str, g.targets)]
        if g.kind in _WITH_ANGLE:
            if g.param is not None:
                if params is None:
                    raise ValueError("circuit has free parameters; pass their values")
                angle = float(params[g.param])
            else:
                angle = float(g.value)
            entry.append(repr(angle))
        lines.append(" ".join(entry))
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str) -> Circuit:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("qubits "):
        raise ValueError("circuit text must begin with a 'qubits N' line")
    n_qubits = int(lines[0].split()[1])
    gates = []
    for ln in lines[1:]:
        parts = ln.split()
        kind = parts[0]
        if kind not in _N_TARGETS:
            raise ValueError(f"unknown gate kind {kind!r} in circuit text")
        n_t = _N_TARGETS[kind]
        targets = tuple(int(p) for p in parts[1 : 1 + n_t])
        rest = parts[1 + n_t :]
        if kind in _WITH_ANGLE:
            if len(rest) != 1:
                raise ValueError(f"gate {kind} expects one angle, got {rest}")
            gates.append(Gate(kind, targets, value=float(rest[0])))
        else:
            if rest:
                raise ValueError(f"gate {kind} takes no angle, got {rest}")
            gates.append(Gate(kind, targets))
    return Circuit(n_qubits, tuple(gates), 0)
