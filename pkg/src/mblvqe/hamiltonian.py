"""Quasiperiodic interacting spin chain as a sum of weighted Pauli strings.

Basis convention used throughout the package: site/qubit 0 is the most
significant bit of a computational-basis index, i.e. the basis state
|b_0 b_1 ... b_{N-1}> has index sum_i b_i * 2^(N-1-i).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

GOLDEN_MEAN = (math.sqrt(5.0) - 1.0) / 2.0


class ResourceLimitError(RuntimeError):
    """A dense computation would exceed its configured size limit."""


@dataclass(frozen=True)
class AAParams:
    """Parameters of the interacting quasiperiodic chain.

    ``w`` is the strength of the cosine onsite field, ``v0`` the Ising
    interaction on each bond, ``eta`` the incommensurate wave number and
    ``phi`` the phase of the cosine. The onsite field on site i (0-based)
    is ``w * cos(2*pi*eta*(i+1) + phi)``.
    """

    n_sites: int
    w: float
    v0: float = 0.5
    eta: float = GOLDEN_MEAN
    phi: float = 0.0
    boundary: str = "periodic"

    def __post_init__(self) -> None:
        if self.n_sites < 2 or self.n_sites % 2:
            raise ValueError("n_sites must be an even integer >= 2")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")


def bonds(params: AAParams) -> tuple[tuple[int, int], ...]:
    """Nearest-neighbour bonds; periodic chains wrap (no duplicate pair at N=2)."""
    n = params.n_sites
    pairs = [(i, i + 1) for i in range(n - 1)]
    if params.boundary == "periodic" and n > 2:
        pairs.append((n - 1, 0))
    return tuple(pairs)


def field_coefficients(params: AAParams) -> np.ndarray:
    """Onsite field values h_i = w*cos(2*pi*eta*i + phi) with 1-based positions."""
    positions = np.arange(1, params.n_sites + 1, dtype=float)
    return params.w * np.cos(2.0 * np.pi * params.eta * positions + params.phi)


@dataclass(frozen=True, eq=False)
class PauliHamiltonian:
    """Hermitian operator stored as (coefficient, Pauli string) pairs."""

    terms: tuple[tuple[float, str], ...]
    n_sites: int

    def __post_init__(self) -> None:
        for coeff, string in self.terms:
            if len(string) != self.n_sites or any(c not in "IXYZ" for c in string):
                raise ValueError(f"invalid Pauli string {string!r} for {self.n_sites} sites")
            if not isinstance(coeff, (int, float)):
                raise ValueError("coefficients must be real numbers")

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def action(self, basis: "SectorBasis | None" = None) -> "HamiltonianAction":
        return HamiltonianAction(self, basis)

    def sector_matrix(self, basis: "SectorBasis") -> np.ndarray:
        return self.action(basis).matrix()

    def dense(self, max_qubits: int = 12) -> np.ndarray:
        """Full 2^N x 2^N matrix; guarded because it grows exponentially."""
        if self.n_sites > max_qubits:
            raise ResourceLimitError(
                f"dense form of {self.n_sites} sites exceeds the {max_qubits}-qubit limit"
            )
        return self.action(None).matrix()


def build_hamiltonian(params: AAParams) -> PauliHamiltonian:
    """XX + YY + v0*ZZ on each bond plus the quasiperiodic Z field on each site."""
    n = params.n_sites

    def string(ops: dict[int, str]) -> str:
        return "".join(ops.get(i, "I") for i in range(n))

    terms: list[tuple[float, str]] = []
    for i, j in bonds(params):
        terms.append((1.0, string({i: "X", j: "X"})))
        terms.append((1.0, string({i: "Y", j: "Y"})))
        if params.v0 != 0.0:
            terms.append((float(params.v0), string({i: "Z", j: "Z"})))
    for i, h in enumerate(field_coefficients(params)):
        if h != 0.0:
            terms.append((float(h), string({i: "Z"})))
    return PauliHamiltonian(tuple(terms), n)


@dataclass(frozen=True, eq=False)
class SectorBasis:
    """Zero-polarization sector: all bitstrings with equally many 0s and 1s,
    ordered by ascending integer value."""

    n_sites: int
    states: np.ndarray

    @property
    def mz(self) -> int:
        return 0

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, state: int) -> int:
        pos = int(np.searchsorted(self.states, state))
        if pos >= self.dim or self.states[pos] != state:
            raise KeyError(f"state {state} is not in the M_z=0 sector")
        return pos


@lru_cache(maxsize=None)
def sector_basis(n_sites: int) -> SectorBasis:
    if n_sites < 2 or n_sites % 2:
        raise ValueError("n_sites must be an even integer >= 2")
    half = n_sites // 2
    states = np.array(
        [s for s in range(2**n_sites) if bin(s).count("1") == half], dtype=np.int64
    )
    states.setflags(write=False)
    return SectorBasis(n_sites, states)


class HamiltonianAction:
    """Matrix-free application of a Pauli sum on a fixed basis.

    With ``basis=None`` the operator acts on the full 2^N space; with a
    SectorBasis it acts on (the projection to) that sector. Terms whose image
    leaves the sector contribute nothing there, so the summed action equals
    the sector-restricted Hamiltonian whenever the full operator preserves
    the sector.
    """

    def __init__(self, h: PauliHamiltonian, basis: SectorBasis | None = None):
        n = h.n_sites
        if basis is None:
            states = np.arange(2**n, dtype=np.int64)
        else:
            if basis.n_sites != n:
                raise ValueError("basis and Hamiltonian site counts differ")
            states = basis.states
        dim = len(states)
        diag = np.zeros(dim)
        hop_groups: dict[tuple[bytes, bytes], list[np.ndarray]] = {}
        hop_index: dict[tuple[bytes, bytes], tuple[np.ndarray, np.ndarray]] = {}

        for coeff, string in h.terms:
            targets = states.copy()
            amp = np.full(dim, complex(coeff))
            diagonal = True
            for q, c in enumerate(string):
                if c == "I":
                    continue
                mask = np.int64(1) << np.int64(n - 1 - q)
                sign = 1 - 2 * ((states & mask) != 0)
                if c == "Z":
                    amp *= sign
                else:
                    targets ^= mask
                    diagonal = False
                    if c == "Y":
                        amp *= 1j * sign
            if diagonal:
                diag += amp.real
                continue
            if basis is None:
                src = np.arange(dim)
                dst = targets
            else:
                pos = np.minimum(np.searchsorted(states, targets), dim - 1)
                valid = states[pos] == targets
                src = np.nonzero(valid)[0]
                dst = pos[valid]
                amp = amp[valid]
            key = (src.tobytes(), dst.tobytes())
            hop_groups.setdefault(key, []).append(amp)
            hop_index.setdefault(key, (src, dst))

        hops = []
        for key, amps in hop_groups.items():
            src, dst = hop_index[key]
            total = np.sum(amps, axis=0)
            if np.abs(total.imag).max(initial=0.0) == 0.0:
                total = total.real
            hops.append((src, dst, total))

        self.dim = dim
        self.n_sites = n
        self._diag = diag
        self._hops = hops

    def __call__(self, psi: np.ndarray) -> np.ndarray:
        psi = np.asarray(psi)
        if psi.shape[0] != self.dim:
            raise ValueError(f"state has dimension {psi.shape[0]}, expected {self.dim}")
        diag = self._diag if psi.ndim == 1 else self._diag[:, None]
        out = (diag * psi).astype(complex)
        for src, dst, amp in self._hops:
            # each Pauli string is a permutation: dst indices are unique
            if psi.ndim == 1:
                out[dst] += amp * psi[src]
            else:
                out[dst] += amp[:, None] * psi[src]
        return out

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.dim, self.dim), dtype=complex)
        idx = np.arange(self.dim)
        m[idx, idx] = self._diag
        for src, dst, amp in self._hops:
            m[dst, src] += amp
        return m

    def expectation(self, psi: np.ndarray) -> float:
        return float(np.real(np.vdot(psi, self(psi))))


def apply_h(h: PauliHamiltonian, basis: SectorBasis | None, psi: np.ndarray) -> np.ndarray:
    """H|psi> over the given basis. Builds the term tables on every call; hold a
    HamiltonianAction instead when applying repeatedly."""
    return HamiltonianAction(h, basis)(psi)


def project_to_sector(
    psi: np.ndarray, basis: SectorBasis, *, check: bool = True, tol: float = 1e-8
) -> np.ndarray:
    """Restrict a full-space state to the sector amplitudes."""
    psi = np.asarray(psi)
    if psi.shape[0] != 2**basis.n_sites:
        raise ValueError("state dimension does not match the full space of the basis")
    out = psi[basis.states]
    if check:
        leaked = np.linalg.norm(psi) ** 2 - np.linalg.norm(out) ** 2
        if leaked > tol:
            raise ValueError(f"state has weight {leaked:.3e} outside the M_z=0 sector")
    return out


def embed_in_full(psi_sector: np.ndarray, basis: SectorBasis) -> np.ndarray:
    psi_sector = np.asarray(psi_sector)
    if psi_sector.shape[0] != basis.dim:
        raise ValueError("state dimension does not match the sector basis")
    out = np.zeros(2**basis.n_sites, dtype=complex)
    out[basis.states] = psi_sector
    return out
