"""End-to-end wiring: dataset -> derivatives -> grouped system -> discovery.

A Dataset bundles the field with the provenance needed to reproduce it
(scenario metadata, noise level, seeds, any filtering applied).  Randomness is
derived, never shared: the dataset's noise stream comes from
stage_seed(root, "noise"), and the sampler derives one child seed per
thresholding update from its own config seed, so partial re-runs of a pipeline
stay consistent with full runs.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .differentiation import build_derivative_stack
from .fields import SpatioTemporalField
from .filters import FilterSpec, apply_filter
from .gibbs import BglssConfig
from .library import (
    GroupedLinearSystem,
    LibrarySpec,
    assemble_grouped_system,
    evaluate_terms,
    normalize_columns,
)
from .solvers import PdeScenario, add_noise, solve
from .tbglss import DiscoveryReport, ThresholdSpec, run_tbglss

NOISE_DOUBLING_LEVEL = 0.02  # chain lengths double at and above this noise level


def stage_seed(root_seed: int, stage: str) -> int:
    """Deterministic per-stage seed derivation from the root seed."""
    digest = hashlib.sha256(stage.encode()).digest()
    salt = int.from_bytes(digest[:4], "big")
    return int(np.random.SeedSequence((root_seed, salt)).generate_state(1)[0])


@dataclass(frozen=True)
class Dataset:
    field: SpatioTemporalField
    metadata: dict

    @property
    def noise_level(self) -> float:
        return float(self.metadata.get("noise_level", 0.0))

    @property
    def varying_axis(self) -> str:
        return self.metadata.get("varying_axis", "time")

    @property
    def retain_t_from(self) -> float | None:
        return self.metadata.get("retain_t_from")

    def dataset_id(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.field.values).tobytes())
        h.update(np.ascontiguousarray(self.field.x_coords).tobytes())
        h.update(np.ascontiguousarray(self.field.t_coords).tobytes())
        return h.hexdigest()[:16]


def simulate_dataset(scenario: PdeScenario, noise_level: float = 0.0, seed: int = 0) -> Dataset:
    """Solve the scenario and optionally add white noise (seed-derived)."""
    clean = solve(scenario)
    noisy = add_noise(clean, noise_level, stage_seed(seed, "noise")) if noise_level > 0 else clean
    metadata = scenario.metadata()
    metadata.update({"noise_level": noise_level, "seed": seed})
    return Dataset(noisy, metadata)


def filter_dataset(dataset: Dataset, spec: FilterSpec) -> Dataset:
    filtered = apply_filter(dataset.field, spec)
    metadata = dict(dataset.metadata)
    metadata.setdefault("filters", [])
    metadata["filters"] = list(metadata["filters"]) + [spec.to_dict()]
    return Dataset(filtered, metadata)


SMOOTHING_NOISE_LEVEL = 0.005  # heavy-smoothing tier starts here


@dataclass(frozen=True)
class DifferentiationSpec:
    """How derivatives are estimated; 'auto' picks a tier by noise level.

    Tiers: clean data uses centered finite differences; barely-noisy data
    (below 0.5% of sigma_u) uses narrow local polynomial fits; noisier data
    additionally smooths the field along both axes first and widens the fit
    windows.
    """

    method: str = "auto"  # auto | finite_difference | poly_fit
    space_width: int = 9
    space_degree: int = 4
    time_width: int = 5
    time_degree: int = 3
    prefilter_time: tuple[int, int] | None = None  # (window, degree) SG along time
    prefilter_space: tuple[int, int] | None = None

    def resolve(self, noise_level: float, filtered: bool = False) -> "DifferentiationSpec":
        if self.method != "auto":
            return self
        if noise_level == 0:
            return replace(self, method="finite_difference")
        if filtered:
            # data already denoised upstream: widen the fit slightly, no prefilter
            return replace(self, method="poly_fit", space_width=19, space_degree=4)
        if noise_level < SMOOTHING_NOISE_LEVEL:
            return replace(self, method="poly_fit")
        return replace(
            self,
            method="poly_fit",
            space_width=17,
            space_degree=4,
            time_width=9,
            time_degree=3,
            prefilter_time=(21, 3),
            prefilter_space=(9, 4),
        )


def build_system(
    dataset: Dataset,
    library: LibrarySpec | None = None,
    diff: DifferentiationSpec | None = None,
) -> GroupedLinearSystem:
    """Differentiate, evaluate the library, assemble and normalize the system."""
    library = library or LibrarySpec.standard()
    already_filtered = bool(dataset.metadata.get("filters"))
    diff = (diff or DifferentiationSpec()).resolve(dataset.noise_level, already_filtered)
    field_used = dataset.field
    if diff.prefilter_time is not None:
        w, d = diff.prefilter_time
        field_used = apply_filter(field_used, FilterSpec.savitzky_golay(w, d, axis="time"))
    if diff.prefilter_space is not None:
        w, d = diff.prefilter_space
        field_used = apply_filter(field_used, FilterSpec.savitzky_golay(w, d, axis="space"))
    stack = build_derivative_stack(
        field_used,
        max_space_order=library.max_derivative,
        space_method=diff.method,
        time_method=diff.method,
        space_width=diff.space_width,
        space_degree=diff.space_degree,
        time_width=diff.time_width,
        time_degree=diff.time_degree,
    )
    u_t = stack.u_t
    x_coords, t_coords = stack.x_coords, stack.t_coords
    term_values = evaluate_terms(stack, library)

    retain = dataset.retain_t_from
    if retain is not None:
        keep = t_coords >= retain - 1e-12
        term_values = term_values[:, keep, :]
        u_t = u_t[:, keep]
        t_coords = t_coords[keep]

    varying = dataset.varying_axis
    step_coords = t_coords if varying == "time" else x_coords
    system = assemble_grouped_system(term_values, u_t, varying, step_coords, library.descriptors)
    return normalize_columns(system)


@dataclass(frozen=True)
class MethodConfig:
    """Method choice plus its parameters for one discovery run."""

    method: str = "tbglss"  # tbglss | sgtr | group_lasso
    thresholds: ThresholdSpec | None = None
    bglss: BglssConfig = field(default_factory=BglssConfig)
    update_iterations: int = 200
    update_burnin: int = 50
    final_chains: int = 1
    with_ci: bool = False  # bootstrap confidence intervals in the report
    keep_final_ensemble: bool = False
    # sgtr / group_lasso: fixed parameter, or None to select by lowest loss over a grid
    sgtr_threshold: float | None = None
    sgtr_ridge: float = 1e-5
    lasso_lam: float | None = None

    def __post_init__(self):
        if self.method not in ("tbglss", "sgtr", "group_lasso"):
            raise ValueError("method must be tbglss, sgtr or group_lasso")
        if self.method == "tbglss" and self.thresholds is None:
            raise ValueError("tbglss needs thresholds")


def discover(dataset: Dataset, method_config: MethodConfig, system: GroupedLinearSystem | None = None,
             library: LibrarySpec | None = None, diff: DifferentiationSpec | None = None) -> DiscoveryReport:
    """Run one discovery method on a dataset and wrap the result in a report."""
    from .baselines import GroupLassoConfig, SgtrConfig, group_lasso, sgtr
    from .selection import aic_loss, default_grid, sweep

    resolved_diff = (diff or DifferentiationSpec()).resolve(
        dataset.noise_level, bool(dataset.metadata.get("filters"))
    )
    if system is None:
        system = build_system(dataset, library=library, diff=resolved_diff)
    provenance = {
        "dataset_id": dataset.dataset_id(),
        "dataset": dataset.metadata,
        "n_steps": system.n_steps,
        "n_rows": system.n_rows,
        "differentiation": asdict(resolved_diff),
    }

    if method_config.method == "tbglss":
        cfg = method_config.bglss
        if dataset.noise_level >= NOISE_DOUBLING_LEVEL:
            cfg = replace(cfg, n_iterations=2 * cfg.n_iterations, n_burnin=2 * cfg.n_burnin)
            update_iterations = 2 * method_config.update_iterations
            update_burnin = 2 * method_config.update_burnin
        else:
            update_iterations = method_config.update_iterations
            update_burnin = method_config.update_burnin
        return run_tbglss(
            system,
            method_config.thresholds,
            cfg,
            update_iterations=update_iterations,
            update_burnin=update_burnin,
            final_chains=method_config.final_chains,
            provenance=provenance,
            keep_final_ensemble=method_config.keep_final_ensemble,
            bootstrap_ci=method_config.with_ci,
        )

    if method_config.method == "sgtr":
        if method_config.sgtr_threshold is not None:
            trajectories = sgtr(
                system, SgtrConfig(threshold=method_config.sgtr_threshold, ridge=method_config.sgtr_ridge)
            )
            chosen = method_config.sgtr_threshold
        else:
            curve = sweep(system, "sgtr_threshold", default_grid("sgtr_threshold"),
                          method="sgtr", fixed={"ridge": method_config.sgtr_ridge})
            chosen = curve.argmin["loss"]
            trajectories = sgtr(system, SgtrConfig(threshold=chosen, ridge=method_config.sgtr_ridge))
            provenance["selected_by"] = "lowest loss over sgtr_threshold grid"
        beta_norm = trajectories.values * system.scales
        k = int(trajectories.active.sum()) * system.n_steps
        return DiscoveryReport(
            trajectories=trajectories,
            stdev=np.zeros_like(trajectories.values),
            criteria={},
            loss=aic_loss(system, beta_norm, k),
            total_error_bar=None,
            update_history=(),
            thresholds=None,
            method="sgtr",
            hyperparameters={"threshold": chosen, "ridge": method_config.sgtr_ridge},
            provenance=provenance,
            empty_model=not bool(trajectories.active.any()),
        )

    # group lasso
    if method_config.lasso_lam is not None:
        result = group_lasso(system, GroupLassoConfig(lam=method_config.lasso_lam))
        chosen = method_config.lasso_lam
    else:
        curve = sweep(system, "lambda", default_grid("lambda", system), method="group_lasso")
        chosen = curve.argmin["loss"]
        result = group_lasso(system, GroupLassoConfig(lam=chosen))
        provenance["selected_by"] = "lowest loss over lambda grid"
    k = int(result.trajectories.active.sum()) * system.n_steps
    return DiscoveryReport(
        trajectories=result.trajectories,
        stdev=np.zeros_like(result.trajectories.values),
        criteria={},
        loss=aic_loss(system, result.beta_normalized, k),
        total_error_bar=None,
        update_history=(),
        thresholds=None,
        method="group_lasso",
        hyperparameters={"lam": chosen, "converged": result.converged, "sweeps": result.n_sweeps},
        provenance=provenance,
        empty_model=not bool(result.trajectories.active.any()),
    )
