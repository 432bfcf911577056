import numpy as np
import pytest

from mblvqe.hamiltonian import AAParams, ResourceLimitError, build_hamiltonian, sector_basis
from mblvqe.spectra import (
    POISSON_MEAN_RATIO,
    diagonalize,
    eipr,
    gap_ratios,
    level_spacing_ratio,
    overlap_spectrum,
)

from oracles import projected_sector_matrix, random_state


def _eig(n=6, w=4.0, phi=0.3, **kwargs):
    params = AAParams(n, w, phi=phi, **kwargs)
    h = build_hamiltonian(params)
    return h, diagonalize(h, sector_basis(n))


def test_two_site_hand_example():
    # sector {|01>, |10>}: hopping 2 off-diagonal, interaction -v0 on the diagonal
    h = build_hamiltonian(AAParams(2, 0.0, v0=0.5))
    basis = sector_basis(2)
    assert np.allclose(h.sector_matrix(basis), [[-0.5, 2.0], [2.0, -0.5]], atol=1e-14)
    eig = diagonalize(h, basis)
    assert np.allclose(eig.eigenvalues, [-2.5, 1.5], atol=1e-12)


def test_eigenvalue_sum_equals_trace():
    h, eig = _eig(6, 7.0)
    trace = np.trace(h.sector_matrix(sector_basis(6))).real
    assert abs(eig.eigenvalues.sum() - trace) < 1e-10


def test_eigenpairs_and_orthonormality():
    h, eig = _eig(6, 5.0)
    m = projected_sector_matrix(h.terms, 6)
    for k in range(eig.dim):
        res = m @ eig.eigenvectors[:, k] - eig.eigenvalues[k] * eig.eigenvectors[:, k]
        assert np.linalg.norm(res) < 1e-10
    gram = eig.eigenvectors.conj().T @ eig.eigenvectors
    assert np.abs(gram - np.eye(eig.dim)).max() < 1e-10


def test_spectral_reconstruction():
    h, eig = _eig(6, 3.0)
    rebuilt = (eig.eigenvectors * eig.eigenvalues) @ eig.eigenvectors.conj().T
    assert np.linalg.norm(rebuilt - h.sector_matrix(sector_basis(6))) < 1e-8


def test_diagonalize_resource_limit():
    h = build_hamiltonian(AAParams(8, 1.0))
    with pytest.raises(ResourceLimitError):
        diagonalize(h, sector_basis(8), max_dim=10)


def test_gap_ratios_equal_spacing():
    ratios, ndeg = gap_ratios(np.arange(10.0))
    assert np.all(ratios == 1.0)
    assert ndeg == 0


def test_gap_ratios_degenerate_pair():
    ratios, ndeg = gap_ratios(np.array([0.0, 1.0, 1.0, 1.0, 2.0]))
    # two zero gaps meet twice: both 0/0 ties count and contribute ratio 0
    assert ndeg == 1
    assert ratios.min() == 0.0


def test_gap_ratios_bounded():
    rng = np.random.default_rng(0)
    ratios, _ = gap_ratios(np.sort(rng.standard_normal(200)))
    assert np.all((ratios >= 0.0) & (ratios <= 1.0))


def test_level_statistics_limits_small():
    # localized side sits at the Poisson value, delocalized side well above it
    loc = level_spacing_ratio(AAParams(8, 10.0, boundary="open"), 40, seed=3)
    assert abs(loc.mean_ratio - POISSON_MEAN_RATIO) < 0.03
    erg = level_spacing_ratio(AAParams(8, 1.0, boundary="open"), 40, seed=3)
    assert erg.mean_ratio > 0.47
    assert np.all((loc.ratios >= 0) & (loc.ratios <= 1))


def test_level_statistics_middle_window_runs():
    stats = level_spacing_ratio(AAParams(6, 2.0), 5, seed=1, window="middle")
    assert 0.0 <= stats.mean_ratio <= 1.0
    with pytest.raises(ValueError):
        level_spacing_ratio(AAParams(6, 2.0), 0)


def test_strong_field_eigenvectors_are_localized():
    # mid-spectrum eigenstates concentrate on few basis states at strong
    # quasiperiodic field and spread out at weak field
    basis = sector_basis(10)

    def mean_support_ipr(w):
        h = build_hamiltonian(AAParams(10, w, phi=0.3))
        eig = diagonalize(h, basis)
        mid = eig.eigenvectors[:, eig.dim // 4 : (3 * eig.dim) // 4]
        return float(np.mean(np.sum(np.abs(mid) ** 4, axis=0)))

    strong = mean_support_ipr(8.0)
    weak = mean_support_ipr(1.5)
    assert strong > 5.0 * weak
    assert strong > 0.2


def test_eipr_eigenstate_and_uniform():
    _, eig = _eig(6, 6.0)
    assert eipr(eig.eigenvectors[:, 4], eig) == pytest.approx(1.0, abs=1e-10)
    uniform = eig.eigenvectors.sum(axis=1) / np.sqrt(eig.dim)
    assert eipr(uniform, eig) == pytest.approx(1.0 / eig.dim, abs=1e-12)


def test_eipr_two_state_mix():
    _, eig = _eig(6, 6.0)
    psi = (eig.eigenvectors[:, 2] + eig.eigenvectors[:, 9]) / np.sqrt(2.0)
    assert eipr(psi, eig) == pytest.approx(0.5, abs=1e-12)
    a, b = 0.8, 0.6
    mix = a * eig.eigenvectors[:, 2] + b * eig.eigenvectors[:, 9]
    assert eipr(mix, eig) == pytest.approx(a**4 + b**4, abs=1e-12)


def test_eipr_bounds_random():
    rng = np.random.default_rng(11)
    _, eig = _eig(6, 2.0)
    for _ in range(25):
        value = eipr(random_state(eig.dim, rng), eig)
        assert 1.0 / eig.dim - 1e-12 <= value <= 1.0 + 1e-12


def test_eipr_rejects_unnormalized():
    _, eig = _eig(4, 1.0)
    with pytest.raises(ValueError):
        eipr(np.ones(eig.dim), eig)


def test_overlap_spectrum_consistency():
    rng = np.random.default_rng(12)
    _, eig = _eig(6, 4.0)
    psi = random_state(eig.dim, rng)
    spectrum = overlap_spectrum(psi, eig)
    lams = np.array([s[0] for s in spectrum])
    weights = np.array([s[1] for s in spectrum])
    assert np.all(np.diff(lams) >= 0)
    assert weights.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.sum(weights**2) == pytest.approx(eipr(psi, eig), abs=1e-10)
    single = overlap_spectrum(eig.eigenvectors[:, 3], eig)
    weights = np.array([s[1] for s in single])
    assert weights[3] == pytest.approx(1.0, abs=1e-10)
    assert np.delete(weights, 3).max() < 1e-10
