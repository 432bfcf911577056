"""Experiment pipelines behind the CLI: parameter sweeps, trial ensembles,
depth fits and structured CSV/JSON output with per-point caching."""

from __future__ import annotations

import configparser
import copy
import hashlib
import json
import math
import os
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .ansatz import (
    CONTROLLED_BOND_TWO_QUBIT_GATES,
    AnsatzConfig,
    TrotterPlan,
    pqc,
    preparation_circuit,
    trotter_step,
)
from .compiling import CompileProblem, build_target, compile_evolution
from .hamiltonian import (
    GOLDEN_MEAN,
    AAParams,
    ResourceLimitError,
    build_hamiltonian,
    project_to_sector,
    sector_basis,
)
from .noise import DENSITY_MAX_QUBITS, NoiseModel
from .serialize import circuit_to_text
from .spectra import diagonalize, eipr, level_spacing_ratio
from .statevec import bind, concat
from .vqe import VqeConfig, input_state, output_state, run_ensemble
from .witness import exact_evolution, witness_circuit, witness_exact, witness_with_preparation


class ConfigError(ValueError):
    """The experiment configuration is invalid."""


EXPERIMENTS = (
    "level_stats",
    "input_eipr_scan",
    "vqe_sweep",
    "witness_sweep",
    "noisy_witness",
    "trotter_witness",
    "compile",
    "depth_fit",
    "scaling",
)

SCHEMAS = {
    "level_stats": ("level_stats-v1", ["N", "W", "n_phases", "mean_ratio", "n_degenerate"]),
    "input_eipr_scan": (
        "input_eipr_scan-v1",
        ["N", "W", "theta0", "eipr", "energy", "energy_fraction"],
    ),
    "vqe_sweep": (
        "vqe_sweep-v1",
        ["N", "W", "depth", "trials", "k_best", "mean_eipr", "sem_eipr",
         "mean_variance", "sem_variance", "mean_energy"],
    ),
    "witness_sweep": (
        "witness_sweep-v1",
        ["N", "W", "depth", "trials", "k_best", "mean_eipr", "sem_eipr",
         "mean_r", "sem_r", "ln_one_minus_r"],
    ),
    "trotter_witness": (
        "trotter_witness-v1",
        ["N", "W", "depth", "trials", "k_best", "n_slices", "mean_r", "sem_r",
         "ln_one_minus_r"],
    ),
    "noisy_witness": (
        "noisy_witness-v1",
        ["N", "W", "depth", "trials", "k_best", "engine", "trotter", "p",
         "mean_r", "sem_r"],
    ),
    "compile": (
        "compile-v1",
        ["N", "W", "t", "depth_vqc", "fidelity", "two_qubit_gates",
         "trotter_two_qubit_gates"],
    ),
    "depth_fit": (
        "depth_fit-v1",
        ["N", "W", "fitted_depth", "slope", "intercept", "n_points", "reliable"],
    ),
    "scaling": (
        "scaling-v1",
        ["N", "depth", "metric", "w_mbl", "w_thermal", "gap", "gap_err"],
    ),
}

SEED_ENV_VAR = "MBLVQE_SEED"

_DEFAULTS: dict[str, dict] = {
    "run": {"experiment": "", "seed": 0, "out": "results", "workers": 1},
    "model": {
        "n_sites": 8,
        "w": 8.0,
        "v0": 0.5,
        "eta": GOLDEN_MEAN,
        "phi": 0.0,
        "boundary": "periodic",
    },
    "ansatz": {"depth_vqe": 4, "theta0": 0.4, "init_scale": 0.1},
    "vqe": {
        "optimizer": "adam",
        "learning_rate": 0.01,
        "max_iters": 2000,
        "grad_tol": 1e-7,
        "n_trials": 100,
        "k_best": 10,
    },
    "noise": {"p": 1e-3, "placement": "per_hardware_gate"},
    "sweep": {
        "w_values": (1.5, 8.0),
        "depths": (2, 4, 6, 8),
        "sizes": (6, 8),
        "theta0_values": tuple(i / 10.0 for i in range(21)),
        "n_phases": 200,
    },
    "witness": {
        "t_rule": "inv_w",
        "t_scale": 1.0,
        "t_fixed": 1.0,
        "trotter": False,
        "n_slices": 1,
        "engine": "density",
        "n_traj": 2000,
    },
    "compile": {
        "depth_vqc": 6,
        "n_restarts": 20,
        "max_iters": 2000,
        "learning_rate": 0.05,
        "fidelity_goal": 0.999,
        "t_scale": 0.15,
    },
    "fit": {"effective_zero": -8.9},
    "scaling": {"w_mbl": 4.5, "w_thermal": 2.5, "noisy": False},
}

# the noisy protocol averages 5 best of 20 trials rather than 10 of 100
_EXPERIMENT_DEFAULTS: dict[str, dict[str, dict]] = {
    "noisy_witness": {"vqe": {"n_trials": 20, "k_best": 5}},
}


@dataclass(frozen=True)
class SweepGrid:
    w_values: tuple[float, ...]
    depths: tuple[int, ...]
    sizes: tuple[int, ...]
    theta0_values: tuple[float, ...]
    n_phases: int


@dataclass(frozen=True)
class WitnessSettings:
    t_rule: str = "inv_w"
    t_scale: float = 1.0
    t_fixed: float = 1.0
    trotter: bool = False
    n_slices: int = 1
    engine: str = "density"
    n_traj: int = 2000

    def evolution_time(self, w: float) -> float:
        if self.t_rule == "inv_w":
            return self.t_scale / w
        return self.t_fixed


@dataclass(frozen=True)
class CompileSettings:
    depth_vqc: int = 6
    n_restarts: int = 20
    max_iters: int = 2000
    learning_rate: float = 0.05
    fidelity_goal: float = 0.999
    t_scale: float = 0.15


@dataclass(frozen=True)
class FitSettings:
    effective_zero: float = -8.9


@dataclass(frozen=True)
class ScalingSettings:
    w_mbl: float = 4.5
    w_thermal: float = 2.5
    noisy: bool = False


@dataclass
class ExperimentConfig:
    experiment: str
    vqe: VqeConfig
    noise: NoiseModel
    sweep: SweepGrid
    witness: WitnessSettings
    compile: CompileSettings
    fit: FitSettings
    scaling: ScalingSettings
    out_dir: str
    seed: int
    workers: int
    raw: dict = field(repr=False, default_factory=dict)

    @property
    def model(self) -> AAParams:
        return self.vqe.model

    @property
    def ansatz(self) -> AnsatzConfig:
        return self.vqe.ansatz


def _coerce(value: str, template):
    if isinstance(template, bool):
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean from {value!r}")
    if isinstance(template, int):
        return int(value)
    if isinstance(template, float):
        return float(value)
    if isinstance(template, tuple):
        items = [v.strip() for v in value.split(",") if v.strip()]
        element = template[0] if template else 0.0
        return tuple(_coerce(v, element) for v in items)
    return value.strip()


def _merge_value(data: dict, section: str, key: str, raw_value: str) -> None:
    if section not in data:
        raise ConfigError(f"unknown config section [{section}]")
    if key not in data[section]:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    try:
        data[section][key] = _coerce(raw_value, _DEFAULTS[section][key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc


def load_config(
    experiment: str,
    config_path: str | None = None,
    overrides: tuple[str, ...] = (),
    seed: int | None = None,
    out_dir: str | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    data = copy.deepcopy(_DEFAULTS)
    for section, values in _EXPERIMENT_DEFAULTS.get(experiment, {}).items():
        data[section].update(values)
    data["run"]["experiment"] = experiment

    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        try:
            data["run"]["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer") from exc

    if config_path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        read = parser.read(config_path)
        if not read:
            raise ConfigError(f"config file {config_path!r} not found")
        for section in parser.sections():
            for key, raw_value in parser.items(section):
                if section == "run" and key == "experiment":
                    continue  # the subcommand owns the experiment name
                _merge_value(data, section, key, raw_value)

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        dotted, raw_value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        _merge_value(data, section.strip(), key.strip(), raw_value)

    if seed is not None:
        data["run"]["seed"] = int(seed)
    if out_dir is not None:
        data["run"]["out"] = out_dir
    if workers is not None:
        data["run"]["workers"] = int(workers)

    return _build_config(data)


def _build_config(data: dict) -> ExperimentConfig:
    try:
        model = AAParams(
            n_sites=data["model"]["n_sites"],
            w=data["model"]["w"],
            v0=data["model"]["v0"],
            eta=data["model"]["eta"],
            phi=data["model"]["phi"],
            boundary=data["model"]["boundary"],
        )
        ansatz = AnsatzConfig(
            n_sites=data["model"]["n_sites"],
            depth_vqe=data["ansatz"]["depth_vqe"],
            theta0=data["ansatz"]["theta0"],
            init_scale=data["ansatz"]["init_scale"],
            seed=data["run"]["seed"],
        )
        vqe = VqeConfig(
            ansatz=ansatz,
            model=model,
            optimizer=data["vqe"]["optimizer"],
            learning_rate=data["vqe"]["learning_rate"],
            max_iters=data["vqe"]["max_iters"],
            grad_tol=data["vqe"]["grad_tol"],
            n_trials=data["vqe"]["n_trials"],
            k_best=data["vqe"]["k_best"],
            seed=data["run"]["seed"],
        )
        noise = NoiseModel(p=data["noise"]["p"], placement=data["noise"]["placement"])
        sweep = SweepGrid(
            w_values=tuple(data["sweep"]["w_values"]),
            depths=tuple(data["sweep"]["depths"]),
            sizes=tuple(data["sweep"]["sizes"]),
            theta0_values=tuple(data["sweep"]["theta0_values"]),
            n_phases=data["sweep"]["n_phases"],
        )
        witness = WitnessSettings(**data["witness"])
        compile_settings = CompileSettings(**data["compile"])
        fit = FitSettings(**data["fit"])
        scaling = ScalingSettings(**data["scaling"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc

    cfg = ExperimentConfig(
        experiment=data["run"]["experiment"],
        vqe=vqe,
        noise=noise,
        sweep=sweep,
        witness=witness,
        compile=compile_settings,
        fit=fit,
        scaling=scaling,
        out_dir=data["run"]["out"],
        seed=data["run"]["seed"],
        workers=data["run"]["workers"],
        raw=data,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.witness.t_rule not in ("inv_w", "fixed"):
        raise ConfigError(f"unknown t_rule {cfg.witness.t_rule!r}")
    if cfg.witness.engine not in ("statevec", "density", "trajectory"):
        raise ConfigError(f"unknown witness engine {cfg.witness.engine!r}")
    needs_w = ("level_stats", "input_eipr_scan", "vqe_sweep", "witness_sweep",
               "noisy_witness", "trotter_witness", "compile", "depth_fit")
    if cfg.experiment in needs_w and not cfg.sweep.w_values:
        raise ConfigError("sweep.w_values must not be empty")
    needs_depths = ("vqe_sweep", "witness_sweep", "noisy_witness", "trotter_witness")
    if cfg.experiment in needs_depths and not cfg.sweep.depths:
        raise ConfigError("sweep.depths must not be empty")
    if cfg.experiment == "depth_fit" and len(cfg.sweep.depths) < 2:
        raise ConfigError("depth_fit needs at least two depths")
    if cfg.experiment == "input_eipr_scan" and not cfg.sweep.theta0_values:
        raise ConfigError("sweep.theta0_values must not be empty")
    if cfg.experiment == "scaling" and not cfg.sweep.sizes:
        raise ConfigError("sweep.sizes must not be empty")
    if cfg.experiment == "level_stats" and cfg.sweep.n_phases < 1:
        raise ConfigError("sweep.n_phases must be >= 1")


def _hash_payload(cfg: ExperimentConfig) -> dict:
    payload = copy.deepcopy(cfg.raw)
    payload["run"] = {"experiment": cfg.experiment, "seed": cfg.seed}
    return payload


def config_hash(cfg: ExperimentConfig) -> str:
    payload = json.dumps(_jsonify(_hash_payload(cfg)), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class RunRecord:
    experiment: str
    schema_version: str
    columns: list[str]
    rows: list[dict]
    details: dict
    config_hash: str
    config: dict
    seed: int
    software_version: str
    wall_time_s: float = 0.0


def _fmt_cell(value) -> str:
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, (np.integer,)):
        value = int(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def record_csv_text(record: RunRecord) -> str:
    lines = [f"# mblvqe {record.schema_version}"]
    lines.append(",".join(record.columns))
    for row in record.rows:
        lines.append(",".join(_fmt_cell(row[col]) for col in record.columns))
    return "\n".join(lines) + "\n"


def record_json_payload(record: RunRecord) -> dict:
    return _jsonify(
        {
            "experiment": record.experiment,
            "schema_version": record.schema_version,
            "config_hash": record.config_hash,
            "software_version": record.software_version,
            "seed": record.seed,
            "columns": record.columns,
            "rows": record.rows,
            "details": record.details,
            "config": record.config,
        }
    )


def validate_record_payload(payload: dict) -> None:
    """Check the JSON payload against the shipped schema."""
    import importlib.resources as resources

    schema = json.loads(
        resources.files("mblvqe").joinpath("schemas/run_record.schema.json").read_text()
    )
    for key, type_name in schema["required"].items():
        if key not in payload:
            raise ValueError(f"record JSON is missing required key {key!r}")
        expected = {"string": str, "integer": int, "array": list, "object": dict}[type_name]
        if not isinstance(payload[key], expected):
            raise ValueError(f"record key {key!r} is not of type {type_name}")
    for row in payload["rows"]:
        if not isinstance(row, dict):
            raise ValueError("record rows must be objects")


def write_outputs(record: RunRecord, out_dir: str) -> dict[str, str]:
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, record.experiment)
    paths = {"csv": base + ".csv", "json": base + ".json", "meta": base + ".meta.json"}
    with open(paths["csv"], "w") as fh:
        fh.write(record_csv_text(record))
    payload = record_json_payload(record)
    validate_record_payload(payload)
    with open(paths["json"], "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(paths["meta"], "w") as fh:
        json.dump(
            {"wall_time_s": record.wall_time_s, "written_at": time.time()},
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    return paths


# ---------------------------------------------------------------------------
# per-point caching


def _cache_path(cfg: ExperimentConfig, key: str) -> str:
    return os.path.join(cfg.out_dir, ".cache", config_hash(cfg), key + ".json")


def _cache_load(cfg: ExperimentConfig, key: str) -> dict | None:
    path = _cache_path(cfg, key)
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return json.load(fh)


def _cache_store(cfg: ExperimentConfig, key: str, payload: dict) -> None:
    path = _cache_path(cfg, key)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(_jsonify(payload), fh, sort_keys=True)
    os.replace(tmp, path)


def _cached_point(cfg: ExperimentConfig, key: str, compute):
    cached = _cache_load(cfg, key)
    if cached is not None:
        return cached
    payload = compute()
    payload = _jsonify(payload)
    _cache_store(cfg, key, payload)
    return payload


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _point_seed(cfg: ExperimentConfig, index: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, index]).generate_state(1, np.uint64)[0])


def _point_vqe(
    cfg: ExperimentConfig,
    index: int,
    w: float | None = None,
    depth: int | None = None,
    n_sites: int | None = None,
) -> VqeConfig:
    model = cfg.model
    ansatz = cfg.ansatz
    if n_sites is not None:
        model = replace(model, n_sites=n_sites)
        ansatz = replace(ansatz, n_sites=n_sites)
    if w is not None:
        model = replace(model, w=w)
    if depth is not None:
        ansatz = replace(ansatz, depth_vqe=depth)
    seed = _point_seed(cfg, index)
    return replace(cfg.vqe, model=model, ansatz=replace(ansatz, seed=seed), seed=seed)


def _ln_floor(one_minus_r: float) -> float:
    return float(np.log(max(one_minus_r, 1e-300)))


def mean_ln_one_minus(values) -> float:
    """Average of ln(1-r) over trials; log-domain averaging keeps the deep
    tail visible instead of letting one weak trial dominate."""
    return float(np.mean([_ln_floor(1.0 - r) for r in values]))


def _trial_details(ens) -> list[dict]:
    rows = []
    for t in ens.trials:
        rows.append(
            {
                "seed": t.trial_seed,
                "variance": t.variance,
                "energy": t.energy,
                "eipr": t.eipr,
                "converged": t.converged,
                "failed": t.failed,
                "iterations": int(len(t.cost_trace)),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# experiment pipelines


def run_level_stats(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    rows, points = [], []
    for index, w in enumerate(cfg.sweep.w_values):
        key = f"w={w!r}"

        def compute(w=w, index=index):
            params = replace(cfg.model, w=w)
            stats = level_spacing_ratio(params, cfg.sweep.n_phases, seed=_point_seed(cfg, index))
            row = {
                "N": cfg.model.n_sites,
                "W": w,
                "n_phases": stats.n_phases,
                "mean_ratio": stats.mean_ratio,
                "n_degenerate": stats.n_degenerate,
            }
            return {"row": row, "details": {"n_ratios": int(len(stats.ratios))}}

        payload = _cached_point(cfg, key, compute)
        rows.append(payload["row"])
        points.append({"key": key, **payload["details"]})
    return rows, {"points": points}


def run_input_eipr_scan(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    rows = []
    for w in cfg.sweep.w_values:
        params = replace(cfg.model, w=w)
        h = build_hamiltonian(params)
        basis = sector_basis(params.n_sites)
        eig = diagonalize(h, basis)
        span = float(eig.eigenvalues[-1] - eig.eigenvalues[0])
        action = h.action()
        for theta0 in cfg.sweep.theta0_values:
            psi = input_state(replace(cfg.ansatz, theta0=theta0))
            energy = action.expectation(psi)
            sector = project_to_sector(psi, basis)
            sector = sector / np.linalg.norm(sector)
            rows.append(
                {
                    "N": params.n_sites,
                    "W": w,
                    "theta0": theta0,
                    "eipr": eipr(sector, eig),
                    "energy": energy,
                    "energy_fraction": (energy - float(eig.eigenvalues[0])) / span,
                }
            )
    return rows, {}


def _ensemble_point(cfg: ExperimentConfig, index: int, w: float, depth: int,
                    n_sites: int | None = None):
    point_cfg = _point_vqe(cfg, index, w=w, depth=depth, n_sites=n_sites)
    basis = sector_basis(point_cfg.model.n_sites)
    eig = diagonalize(build_hamiltonian(point_cfg.model), basis)
    ens = run_ensemble(point_cfg, eig=eig, n_workers=cfg.workers)
    return point_cfg, eig, ens


def run_vqe_sweep(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    rows, points = [], []
    index = 0
    for w in cfg.sweep.w_values:
        for depth in cfg.sweep.depths:
            key = f"w={w!r}_depth={depth}"

            def compute(w=w, depth=depth, index=index):
                point_cfg, _, ens = _ensemble_point(cfg, index, w, depth)
                agg = ens.aggregate
                row = {
                    "N": point_cfg.model.n_sites,
                    "W": w,
                    "depth": depth,
                    "trials": point_cfg.n_trials,
                    "k_best": point_cfg.k_best,
                    "mean_eipr": agg["mean_eipr"],
                    "sem_eipr": agg["sem_eipr"],
                    "mean_variance": agg["mean_variance"],
                    "sem_variance": agg["sem_variance"],
                    "mean_energy": agg["mean_energy"],
                }
                return {"row": row, "details": {"trials": _trial_details(ens)}}

            payload = _cached_point(cfg, key, compute)
            rows.append(payload["row"])
            points.append({"key": key, **payload["details"]})
            index += 1
    return rows, {"points": points}


def _witness_point_row(cfg: ExperimentConfig, index: int, w: float, depth: int) -> dict:
    """Shared by witness_sweep and depth_fit: exact-route witness of the k-best
    converged states."""
    point_cfg, eig, ens = _ensemble_point(cfg, index, w, depth)
    t = cfg.witness.evolution_time(w)
    basis = eig.basis
    r_values, trial_rows = [], []
    for trial in ens.best_trials:
        psi = output_state(point_cfg, trial.params_final)
        sector = project_to_sector(psi, basis)
        sector = sector / np.linalg.norm(sector)
        res = witness_exact(sector, eig, t)
        r_values.append(res.r)
        trial_rows.append({"seed": trial.trial_seed, "r": res.r, "eipr": trial.eipr,
                           "variance": trial.variance})
    mean_r = float(np.mean(r_values))
    sem_r = float(np.std(r_values, ddof=1) / math.sqrt(len(r_values))) if len(r_values) > 1 else 0.0
    agg = ens.aggregate
    row = {
        "N": point_cfg.model.n_sites,
        "W": w,
        "depth": depth,
        "trials": point_cfg.n_trials,
        "k_best": point_cfg.k_best,
        "mean_eipr": agg["mean_eipr"],
        "sem_eipr": agg["sem_eipr"],
        "mean_r": mean_r,
        "sem_r": sem_r,
        "ln_one_minus_r": mean_ln_one_minus(r_values),
    }
    return {"row": row, "details": {"t": t, "best": trial_rows, "trials": _trial_details(ens)}}


def run_witness_sweep(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    rows, points = [], []
    index = 0
    for w in cfg.sweep.w_values:
        for depth in cfg.sweep.depths:
            key = f"w={w!r}_depth={depth}"
            payload = _cached_point(
                cfg, key, lambda w=w, depth=depth, index=index: _witness_point_row(cfg, index, w, depth)
            )
            rows.append(payload["row"])
            points.append({"key": key, **payload["details"]})
            index += 1
    return rows, {"points": points}


def run_trotter_witness(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    """Noiseless witness with one-slice (or n-slice) Trotterized controlled
    evolution instead of the exact unitary."""
    rows, points = [], []
    index = 0
    for w in cfg.sweep.w_values:
        t = cfg.witness.evolution_time(w)
        for depth in cfg.sweep.depths:
            key = f"w={w!r}_depth={depth}"

            def compute(w=w, depth=depth, index=index, t=t):
                point_cfg, _, ens = _ensemble_point(cfg, index, w, depth)
                plan = TrotterPlan(point_cfg.model, t, n_slices=cfg.witness.n_slices,
                                   controlled=True)
                evolution = trotter_step(plan)
                r_values = []
                for trial in ens.best_trials:
                    psi = output_state(point_cfg, trial.params_final)
                    res = witness_circuit(psi, evolution, t=t, engine="statevec")
                    r_values.append(res.r)
                mean_r = float(np.mean(r_values))
                sem_r = (
                    float(np.std(r_values, ddof=1) / math.sqrt(len(r_values)))
                    if len(r_values) > 1
                    else 0.0
                )
                row = {
                    "N": point_cfg.model.n_sites,
                    "W": w,
                    "depth": depth,
                    "trials": point_cfg.n_trials,
                    "k_best": point_cfg.k_best,
                    "n_slices": cfg.witness.n_slices,
                    "mean_r": mean_r,
                    "sem_r": sem_r,
                    "ln_one_minus_r": mean_ln_one_minus(r_values),
                }
                return {"row": row, "details": {"t": t, "r_values": r_values}}

            payload = _cached_point(cfg, key, compute)
            rows.append(payload["row"])
            points.append({"key": key, **payload["details"]})
            index += 1
    return rows, {"points": points}


def noisy_witness_of_trial(
    cfg: ExperimentConfig, point_cfg: VqeConfig, params: np.ndarray, t: float, seed: int
):
    """Full noisy pipeline for one converged trial: preparation + variational
    blocks + controlled evolution, all inside the chosen mixed-state engine."""
    system = bind(
        concat(preparation_circuit(point_cfg.ansatz), pqc(point_cfg.ansatz)),
        params if len(params) else None,
    )
    if cfg.witness.trotter:
        evolution = trotter_step(
            TrotterPlan(point_cfg.model, t, n_slices=cfg.witness.n_slices, controlled=True)
        )
    else:
        evolution = exact_evolution(build_hamiltonian(point_cfg.model), t, sign=-1.0)
    return witness_with_preparation(
        system,
        evolution,
        t=t,
        engine=cfg.witness.engine,
        nm=cfg.noise,
        n_traj=cfg.witness.n_traj,
        seed=seed,
    )


def _check_engine_capacity(cfg: ExperimentConfig, n_sites: int) -> None:
    if cfg.witness.engine == "density" and n_sites + 1 > DENSITY_MAX_QUBITS:
        raise ResourceLimitError(
            f"density engine cannot hold {n_sites}+1 qubits "
            f"(limit {DENSITY_MAX_QUBITS}); use the trajectory engine"
        )


def run_noisy_witness(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    _check_engine_capacity(cfg, cfg.model.n_sites)
    rows, points = [], []
    index = 0
    for w in cfg.sweep.w_values:
        t = cfg.witness.evolution_time(w)
        for depth in cfg.sweep.depths:
            key = f"w={w!r}_depth={depth}_trotter={cfg.witness.trotter}"

            def compute(w=w, depth=depth, index=index, t=t):
                point_cfg, _, ens = _ensemble_point(cfg, index, w, depth)
                r_values = []
                for k, trial in enumerate(ens.best_trials):
                    res = noisy_witness_of_trial(
                        cfg, point_cfg, trial.params_final, t, seed=_point_seed(cfg, 7919 + index * 101 + k)
                    )
                    r_values.append(res.r)
                mean_r = float(np.mean(r_values))
                sem_r = (
                    float(np.std(r_values, ddof=1) / math.sqrt(len(r_values)))
                    if len(r_values) > 1
                    else 0.0
                )
                row = {
                    "N": point_cfg.model.n_sites,
                    "W": w,
                    "depth": depth,
                    "trials": point_cfg.n_trials,
                    "k_best": point_cfg.k_best,
                    "engine": cfg.witness.engine,
                    "trotter": cfg.witness.trotter,
                    "p": cfg.noise.p,
                    "mean_r": mean_r,
                    "sem_r": sem_r,
                }
                return {"row": row, "details": {"t": t, "r_values": r_values,
                                                "trials": _trial_details(ens)}}

            payload = _cached_point(cfg, key, compute)
            rows.append(payload["row"])
            points.append({"key": key, **payload["details"]})
            index += 1
    return rows, {"points": points}


def run_compile(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    rows, points = [], []
    os.makedirs(cfg.out_dir, exist_ok=True)
    for index, w in enumerate(cfg.sweep.w_values):
        t = cfg.compile.t_scale / w
        model = replace(cfg.model, w=w)
        target = build_target(model, t)
        problem = CompileProblem(
            target,
            ansatz_depth=cfg.compile.depth_vqc,
            seed=_point_seed(cfg, index),
            max_iters=cfg.compile.max_iters,
            fidelity_goal=cfg.compile.fidelity_goal,
            n_restarts=cfg.compile.n_restarts,
            learning_rate=cfg.compile.learning_rate,
        )
        result = compile_evolution(problem)
        circuit_path = os.path.join(cfg.out_dir, f"compiled_w{w!r}.circuit.txt")
        with open(circuit_path, "w") as fh:
            fh.write(circuit_to_text(result.circuit, result.params))
        rows.append(
            {
                "N": model.n_sites,
                "W": w,
                "t": t,
                "depth_vqc": cfg.compile.depth_vqc,
                "fidelity": result.fidelity,
                "two_qubit_gates": cfg.compile.depth_vqc * model.n_sites,
                "trotter_two_qubit_gates": CONTROLLED_BOND_TWO_QUBIT_GATES * model.n_sites,
            }
        )
        points.append(
            {
                "w": w,
                "restart_index": result.restart_index,
                "iterations": int(len(result.cost_trace)),
                "circuit_file": os.path.basename(circuit_path),
            }
        )
    return rows, {"points": points}


def fit_effective_depth(
    depths, ln_values, effective_zero: float = -8.9
) -> dict:
    """Least-squares line through the unsaturated (depth, ln(1-r)) points and
    its crossing with the effective-zero level."""
    pairs = [(d, y) for d, y in zip(depths, ln_values) if y > effective_zero]
    reliable = len(pairs) >= 2
    if not reliable:
        pairs = list(zip(depths, ln_values))
    xs = np.array([p[0] for p in pairs], dtype=float)
    ys = np.array([p[1] for p in pairs], dtype=float)
    slope, intercept = np.polyfit(xs, ys, 1)
    if slope >= 0.0:
        reliable = False
        fitted = float("nan")
    else:
        fitted = float((effective_zero - intercept) / slope)
    return {
        "fitted_depth": fitted,
        "slope": float(slope),
        "intercept": float(intercept),
        "n_points": int(len(pairs)),
        "reliable": reliable,
    }


def depth_fit(rows: list[dict], effective_zero: float = -8.9) -> list[dict]:
    """Fit the effective-zero crossing depth per (N, W) from witness-sweep rows."""
    grouped: dict[tuple, list[dict]] = {}
    for row in rows:
        grouped.setdefault((row["N"], row["W"]), []).append(row)
    table = []
    for (n, w), group in sorted(grouped.items()):
        group.sort(key=lambda r: r["depth"])
        fit = fit_effective_depth(
            [r["depth"] for r in group],
            [r["ln_one_minus_r"] for r in group],
            effective_zero,
        )
        table.append({"N": n, "W": w, **fit})
    return table


def run_depth_fit(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    sweep_rows, details = run_witness_sweep(cfg)
    rows = depth_fit(sweep_rows, cfg.fit.effective_zero)
    return rows, {"witness_rows": sweep_rows, **details}


def scaling_report(
    rows: list[dict], w_mbl: float, w_thermal: float, metric: str
) -> list[dict]:
    """Per-size gap of ``metric`` between the localized and thermal points."""
    by_point = {(row["N"], row["W"]): row for row in rows}
    sizes = sorted({row["N"] for row in rows})
    table = []
    for n in sizes:
        for w in (w_mbl, w_thermal):
            if (n, w) not in by_point:
                raise KeyError(f"missing grid point N={n}, W={w}")
        mbl = by_point[(n, w_mbl)]
        thermal = by_point[(n, w_thermal)]
        gap = mbl[f"mean_{metric}"] - thermal[f"mean_{metric}"]
        err = math.hypot(mbl[f"sem_{metric}"], thermal[f"sem_{metric}"])
        table.append(
            {
                "N": n,
                "depth": mbl["depth"],
                "metric": metric,
                "w_mbl": w_mbl,
                "w_thermal": w_thermal,
                "gap": gap,
                "gap_err": err,
            }
        )
    return table


def run_scaling(cfg: ExperimentConfig) -> tuple[list[dict], dict]:
    metric = "r" if cfg.scaling.noisy else "eipr"
    if cfg.scaling.noisy:
        _check_engine_capacity(cfg, max(cfg.sweep.sizes))
    point_rows, points = [], []
    index = 0
    for n in cfg.sweep.sizes:
        depth = max(n // 2, 1) if cfg.scaling.noisy else n
        for w in (cfg.scaling.w_mbl, cfg.scaling.w_thermal):
            key = f"n={n}_w={w!r}"

            def compute(n=n, w=w, depth=depth, index=index):
                point_cfg, eig, ens = _ensemble_point(cfg, index, w, depth, n_sites=n)
                agg = ens.aggregate
                row = {
                    "N": n,
                    "W": w,
                    "depth": depth,
                    "mean_eipr": agg["mean_eipr"],
                    "sem_eipr": agg["sem_eipr"],
                }
                if cfg.scaling.noisy:
                    t = cfg.witness.evolution_time(w)
                    r_values = []
                    for k, trial in enumerate(ens.best_trials):
                        res = noisy_witness_of_trial(
                            cfg, point_cfg, trial.params_final, t,
                            seed=_point_seed(cfg, 104729 + index * 101 + k),
                        )
                        r_values.append(res.r)
                    row["mean_r"] = float(np.mean(r_values))
                    row["sem_r"] = (
                        float(np.std(r_values, ddof=1) / math.sqrt(len(r_values)))
                        if len(r_values) > 1
                        else 0.0
                    )
                return {"row": row, "details": {"trials": _trial_details(ens)}}

            payload = _cached_point(cfg, key, compute)
            point_rows.append(payload["row"])
            points.append({"key": key, **payload["details"]})
            index += 1
    rows = scaling_report(point_rows, cfg.scaling.w_mbl, cfg.scaling.w_thermal, metric)
    return rows, {"point_rows": point_rows, "points": points}


_PIPELINES = {
    "level_stats": run_level_stats,
    "input_eipr_scan": run_input_eipr_scan,
    "vqe_sweep": run_vqe_sweep,
    "witness_sweep": run_witness_sweep,
    "noisy_witness": run_noisy_witness,
    "trotter_witness": run_trotter_witness,
    "compile": run_compile,
    "depth_fit": run_depth_fit,
    "scaling": run_scaling,
}


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    start = time.perf_counter()
    rows, details = _PIPELINES[cfg.experiment](cfg)
    schema_version, columns = SCHEMAS[cfg.experiment]
    return RunRecord(
        experiment=cfg.experiment,
        schema_version=schema_version,
        columns=columns,
        rows=_jsonify(rows),
        details=_jsonify(details),
        config_hash=config_hash(cfg),
        config=_jsonify(_hash_payload(cfg)),
        seed=cfg.seed,
        software_version=__version__,
        wall_time_s=time.perf_counter() - start,
    )
