"""Excited-state VQE: energy-variance cost, single trials and seeded ensembles."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .ansatz import AnsatzConfig, initial_parameters, pqc, preparation_circuit
from .hamiltonian import (
    AAParams,
    HamiltonianAction,
    PauliHamiltonian,
    SectorBasis,
    build_hamiltonian,
    project_to_sector,
)
from .optim import MINIMIZERS, NonFiniteCostError
from .spectra import EigenDecomposition, eipr
from .statevec import basis_state, cost_and_grad, simulate


class EnsembleFailedError(RuntimeError):
    """Every trial of an ensemble diverged."""


@dataclass(frozen=True)
class VqeConfig:
    ansatz: AnsatzConfig
    model: AAParams
    optimizer: str = "adam"
    learning_rate: float = 0.01
    max_iters: int = 2000
    grad_tol: float = 1e-7
    n_trials: int = 100
    k_best: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.ansatz.n_sites != self.model.n_sites:
            raise ValueError("ansatz and model disagree on the number of sites")
        if self.optimizer not in MINIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 1 <= self.k_best <= self.n_trials:
            raise ValueError("need 1 <= k_best <= n_trials")


@dataclass
class TrialResult:
    params_final: np.ndarray
    cost_trace: np.ndarray = field(repr=False)
    energy: float = np.nan
    variance: float = np.nan
    eipr: float | None = None
    converged: bool = False
    failed: bool = False
    trial_seed: int = 0


class VarianceCost:
    """Energy variance <H^2> - <H>^2 of a normalized state.

    The cotangent for the adjoint sweep is H^2|psi> - 2<H>*H|psi>, so one
    evaluation costs two Hamiltonian applications.
    """

    def __init__(self, action: HamiltonianAction):
        self._action = action

    def value(self, psi: np.ndarray) -> float:
        hpsi = self._action(psi)
        energy = float(np.real(np.vdot(psi, hpsi)))
        return float(np.real(np.vdot(hpsi, hpsi))) - energy * energy

    def value_and_cotangent(self, psi: np.ndarray) -> tuple[float, np.ndarray]:
        hpsi = self._action(psi)
        energy = float(np.real(np.vdot(psi, hpsi)))
        value = float(np.real(np.vdot(hpsi, hpsi))) - energy * energy
        lam = self._action(hpsi) - (2.0 * energy) * hpsi
        return value, lam


def variance_cost(
    psi: np.ndarray, h: PauliHamiltonian, basis: SectorBasis | None = None
) -> float:
    """One-off variance evaluation; hold a VarianceCost for optimization loops."""
    psi = np.asarray(psi)
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > 1e-8:
        raise ValueError(f"state is not normalized (norm {norm:.12f})")
    return VarianceCost(HamiltonianAction(h, basis)).value(psi)


def input_state(cfg: AnsatzConfig) -> np.ndarray:
    """Output of the preparation circuit on |00...0>."""
    return simulate(preparation_circuit(cfg), basis_state(cfg.n_sites))


def output_state(cfg: VqeConfig, params: np.ndarray) -> np.ndarray:
    return simulate(pqc(cfg.ansatz), input_state(cfg.ansatz), params)


def run_trial(cfg: VqeConfig, trial_seed: int, eig: EigenDecomposition | None = None) -> TrialResult:
    """One seeded optimization of the variance cost from the fixed input state."""
    h = build_hamiltonian(cfg.model)
    action = HamiltonianAction(h)
    circuit = pqc(cfg.ansatz)
    psi_in = input_state(cfg.ansatz)
    cost = VarianceCost(action)
    rng = np.random.default_rng(np.random.SeedSequence(trial_seed))
    x0 = initial_parameters(circuit, cfg.ansatz.init_scale, rng)

    def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
        res = cost_and_grad(circuit, psi_in, cost, x)
        return res.value, res.gradient

    minimize = MINIMIZERS[cfg.optimizer]
    try:
        opt = minimize(
            objective,
            x0,
            learning_rate=cfg.learning_rate,
            max_iters=cfg.max_iters,
            grad_tol=cfg.grad_tol,
        )
    except NonFiniteCostError:
        return TrialResult(
            params_final=x0,
            cost_trace=np.array([np.nan]),
            failed=True,
            trial_seed=trial_seed,
        )

    psi_out = simulate(circuit, psi_in, opt.x)
    hpsi = action(psi_out)
    energy = float(np.real(np.vdot(psi_out, hpsi)))
    result = TrialResult(
        params_final=opt.x,
        cost_trace=opt.trace,
        energy=energy,
        variance=float(opt.fun),
        converged=opt.converged,
        trial_seed=trial_seed,
    )
    if eig is not None:
        result.eipr = _sector_eipr(psi_out, eig)
    return result


def _sector_eipr(psi_full: np.ndarray, eig: EigenDecomposition) -> float:
    psi_sector = project_to_sector(psi_full, eig.basis)
    psi_sector = psi_sector / np.linalg.norm(psi_sector)
    return eipr(psi_sector, eig)


def trial_seeds(cfg: VqeConfig) -> list[int]:
    """Deterministic per-trial seeds derived from the ensemble seed."""
    state = np.random.SeedSequence(cfg.seed).generate_state(cfg.n_trials, np.uint64)
    return [int(s) for s in state]


def _trial_task(args: tuple[VqeConfig, int]) -> TrialResult:
    cfg, seed = args
    return run_trial(cfg, seed)


def select_best(trials: list[TrialResult], k: int) -> list[int]:
    """Indices of the k lowest-variance non-failed trials (ties broken by index)."""
    usable = [i for i, t in enumerate(trials) if not t.failed and np.isfinite(t.variance)]
    usable.sort(key=lambda i: (trials[i].variance, i))
    return usable[:k]


def _mean_sem(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    sem = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, sem


@dataclass
class EnsembleResult:
    trials: list[TrialResult]
    best_indices: list[int]
    aggregate: dict

    @property
    def best_trials(self) -> list[TrialResult]:
        return [self.trials[i] for i in self.best_indices]


def run_ensemble(
    cfg: VqeConfig,
    eig: EigenDecomposition | None = None,
    n_workers: int = 1,
) -> EnsembleResult:
    """n_trials independent seeded trials; aggregates are means over the k_best
    lowest-variance trials and are identical for any worker count."""
    seeds = trial_seeds(cfg)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            trials = list(pool.map(_trial_task, [(cfg, s) for s in seeds]))
    else:
        trials = [run_trial(cfg, s) for s in seeds]

    if eig is not None:
        for t in trials:
            if not t.failed:
                t.eipr = _sector_eipr(output_state(cfg, t.params_final), eig)

    best = select_best(trials, cfg.k_best)
    if not best:
        raise EnsembleFailedError("all trials failed with non-finite costs")

    chosen = [trials[i] for i in best]
    aggregate: dict = {"n_selected": len(chosen), "n_failed": sum(t.failed for t in trials)}
    for key in ("variance", "energy"):
        mean, sem = _mean_sem([getattr(t, key) for t in chosen])
        aggregate[f"mean_{key}"] = mean
        aggregate[f"sem_{key}"] = sem
    if eig is not None:
        mean, sem = _mean_sem([t.eipr for t in chosen])
        aggregate["mean_eipr"] = mean
        aggregate["sem_eipr"] = sem
    return EnsembleResult(trials, best, aggregate)
