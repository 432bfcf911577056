"""Exact diagonalization, spectral statistics and eigenspace diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .hamiltonian import (
    AAParams,
    PauliHamiltonian,
    ResourceLimitError,
    SectorBasis,
    build_hamiltonian,
    sector_basis,
)

# twelve-site zero-polarization sector
DEFAULT_MAX_DIM = 924

POISSON_MEAN_RATIO = 2.0 * np.log(2.0) - 1.0
GOE_MEAN_RATIO = 0.53


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Full spectrum of the sector Hamiltonian; eigenvector columns are
    orthonormal and ordered by ascending eigenvalue."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: SectorBasis

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class LevelStatistics:
    ratios: np.ndarray
    mean_ratio: float
    n_phases: int
    seed: int
    n_degenerate: int = 0
    window: str = "full"


def diagonalize(
    h: PauliHamiltonian, basis: SectorBasis, max_dim: int = DEFAULT_MAX_DIM
) -> EigenDecomposition:
    if basis.dim > max_dim:
        raise ResourceLimitError(
            f"sector dimension {basis.dim} exceeds the configured limit {max_dim}"
        )
    m = h.sector_matrix(basis)
    if np.abs(m.imag).max(initial=0.0) < 1e-14:
        vals, vecs = np.linalg.eigh(m.real)
        vecs = vecs.astype(complex)
    else:
        vals, vecs = np.linalg.eigh(m)
    return EigenDecomposition(vals, vecs, basis)


def gap_ratios(eigenvalues: np.ndarray) -> tuple[np.ndarray, int]:
    """min/max ratios of consecutive level spacings; exact 0/0 ties count as
    degenerate and contribute ratio 0."""
    gaps = np.diff(np.sort(np.asarray(eigenvalues, dtype=float)))
    lo = np.minimum(gaps[:-1], gaps[1:])
    hi = np.maximum(gaps[:-1], gaps[1:])
    degenerate = hi == 0.0
    ratios = np.divide(lo, hi, out=np.zeros_like(lo), where=~degenerate)
    return ratios, int(degenerate.sum())


def level_spacing_ratio(
    params: AAParams,
    n_phases: int,
    seed: int = 0,
    window: str = "full",
    max_dim: int = DEFAULT_MAX_DIM,
) -> LevelStatistics:
    """Mean consecutive-gap ratio over the sector spectrum, averaged over
    random cosine phases drawn uniformly from [0, 2*pi)."""
    if n_phases < 1:
        raise ValueError("n_phases must be >= 1")
    if window not in ("full", "middle"):
        raise ValueError(f"unknown window {window!r}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    basis = sector_basis(params.n_sites)
    pooled = []
    n_degenerate = 0
    for _ in range(n_phases):
        phi = float(rng.uniform(0.0, 2.0 * np.pi))
        eig = diagonalize(build_hamiltonian(replace(params, phi=phi)), basis, max_dim)
        vals = eig.eigenvalues
        if window == "middle":
            vals = vals[len(vals) // 4 : (3 * len(vals)) // 4]
        ratios, ndeg = gap_ratios(vals)
        pooled.append(ratios)
        n_degenerate += ndeg
    ratios = np.concatenate(pooled)
    return LevelStatistics(
        ratios=ratios,
        mean_ratio=float(ratios.mean()),
        n_phases=n_phases,
        seed=seed,
        n_degenerate=n_degenerate,
        window=window,
    )


def _check_normalized(psi: np.ndarray, tol: float = 1e-8) -> None:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"state is not normalized (norm {norm:.12f})")


def eigenbasis_weights(psi: np.ndarray, eig: EigenDecomposition) -> np.ndarray:
    """|<n|psi>|^2 for all eigenstates, in spectral order."""
    psi = np.asarray(psi)
    if psi.shape != (eig.dim,):
        raise ValueError(f"state has shape {psi.shape}, expected ({eig.dim},)")
    _check_normalized(psi)
    amps = eig.eigenvectors.conj().T @ psi
    return np.abs(amps) ** 2


def eipr(psi: np.ndarray, eig: EigenDecomposition) -> float:
    """Eigenspace inverse participation ratio: 1 for an eigenstate, 1/dim for
    a uniform superposition of the whole eigenbasis."""
    weights = eigenbasis_weights(psi, eig)
    return float(np.sum(weights**2))


def overlap_spectrum(psi: np.ndarray, eig: EigenDecomposition) -> list[tuple[float, float]]:
    weights = eigenbasis_weights(psi, eig)
    return list(zip(eig.eigenvalues.tolist(), weights.tolist()))
