"""Excited-state VQE toolkit for probing many-body localization in
quasiperiodic spin chains: Hamiltonian construction, exact diagonalization,
a statevector engine with adjoint gradients, variance-cost VQE ensembles,
depolarizing-noise engines, the ancilla-purity eigenstate witness and
variational compilation of controlled time evolution."""

__version__ = "0.1.0"

from .ansatz import (
    AnsatzConfig,
    TrotterPlan,
    hardware_efficient_ansatz,
    hardware_two_qubit_count,
    pqc,
    preparation_circuit,
    trotter_step,
)
from .compiling import CompileProblem, CompileResult, build_target, compile_evolution
from .hamiltonian import (
    AAParams,
    HamiltonianAction,
    PauliHamiltonian,
    ResourceLimitError,
    SectorBasis,
    apply_h,
    build_hamiltonian,
    embed_in_full,
    project_to_sector,
    sector_basis,
)
from .noise import (
    DensityMatrix,
    NoiseModel,
    TrajectoryEnsemble,
    apply_depolarizing,
    depolarize_qubit,
    simulate_density,
    simulate_trajectories,
)
from .spectra import (
    EigenDecomposition,
    LevelStatistics,
    diagonalize,
    eipr,
    gap_ratios,
    level_spacing_ratio,
    overlap_spectrum,
)
from .statevec import (
    Circuit,
    Gate,
    GradResult,
    apply_gate,
    bind,
    circuit_unitary,
    concat,
    cost_and_grad,
    gate_matrix,
    shift_qubits,
    simulate,
)
from .vqe import (
    EnsembleFailedError,
    EnsembleResult,
    TrialResult,
    VarianceCost,
    VqeConfig,
    run_ensemble,
    run_trial,
    variance_cost,
)
from .witness import (
    AncillaState,
    WitnessResult,
    estimate_r_randomized,
    estimate_r_tomography,
    exact_evolution,
    witness_circuit,
    witness_exact,
    witness_noisy_analytic,
    witness_with_preparation,
)
