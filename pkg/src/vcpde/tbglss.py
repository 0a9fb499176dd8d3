"""Sequential thresholding around the spike-and-slab group sampler.

Each update samples the posterior on the surviving groups, estimates the
coefficients by their posterior medians, and removes every group that fails an
active criterion: root-mean-square below t_rms (insignificant scale) or group
error bar above t_ge (not enough posterior confidence).  Groups whose median
is already exactly zero (spike-majority) go regardless of thresholds.  The
loop stops when an update removes nothing; that final update is re-run with a
long chain and its statistics are reported.

Criteria are evaluated on normalized-scale coefficients so thresholds stay
unitless across heterogeneous terms; reported trajectories and error bands are
mapped back to physical units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .gibbs import BglssConfig, PosteriorEnsemble, sample_posterior
from .library import CoefficientTrajectories, GroupedLinearSystem

DEFAULT_UPDATE_ITERATIONS = 200
DEFAULT_UPDATE_BURNIN = 50


@dataclass(frozen=True)
class ThresholdSpec:
    """Removal thresholds; at least one criterion must be active."""

    t_rms: float | None = None
    t_ge: float | None = None

    def __post_init__(self):
        if self.t_rms is None and self.t_ge is None:
            raise ValueError("at least one threshold must be given")
        if self.t_rms is not None and self.t_rms < 0:
            raise ValueError("t_rms must be nonnegative")
        if self.t_ge is not None and self.t_ge < 0:
            raise ValueError("t_ge must be nonnegative")


class ZeroNormGroupError(ValueError):
    """The group is already excluded (zero norm); criteria do not apply."""


def rms_criterion(beta_g: np.ndarray) -> float:
    """Root mean square of one group's trajectory: ||beta_g|| / sqrt(m_g)."""
    beta_g = np.asarray(beta_g, dtype=float)
    if beta_g.size == 0:
        raise ValueError("empty group")
    return float(np.linalg.norm(beta_g) / np.sqrt(beta_g.size))


def group_error_bar(beta_g: np.ndarray, s2_g: np.ndarray) -> float:
    """Summed coefficient variances normalized by the group's squared norm."""
    beta_g = np.asarray(beta_g, dtype=float)
    s2_g = np.asarray(s2_g, dtype=float)
    norm_sq = float(beta_g @ beta_g)
    if norm_sq == 0.0:
        raise ZeroNormGroupError("zero-norm group is already excluded")
    return float(s2_g.sum() / norm_sq)


@dataclass(frozen=True)
class UpdateRecord:
    """One committed thresholding update."""

    support_before: tuple[str, ...]
    removed: tuple[str, ...]
    criteria: dict  # descriptor -> {"rms": float, "group_error_bar": float | None}
    n_iterations: int

    @property
    def support_after(self) -> tuple[str, ...]:
        return tuple(d for d in self.support_before if d not in self.removed)


@dataclass(frozen=True)
class DiscoveryReport:
    """Everything one run produced, plus the provenance to reproduce it."""

    trajectories: CoefficientTrajectories  # physical units, full library width
    stdev: np.ndarray  # (n_steps, n_groups) physical posterior stdevs, 0 for excluded
    criteria: dict  # final normalized rms / group error bar per surviving descriptor
    loss: float | None
    total_error_bar: float | None
    update_history: tuple[UpdateRecord, ...]
    thresholds: ThresholdSpec | None
    method: str
    hyperparameters: dict
    provenance: dict
    empty_model: bool = False
    chain_medians: np.ndarray | None = None  # (n_chains, n_steps, n_groups), multi-chain mode
    bootstrap_cis: dict | None = None  # descriptor -> per-step [low, high], physical units
    final_ensemble: PosteriorEnsemble | None = field(default=None, repr=False, compare=False)

    @property
    def selected(self) -> tuple[str, ...]:
        return self.trajectories.selected

    @property
    def n_updates(self) -> int:
        return len(self.update_history)

    def rendered_equation(self) -> str:
        """Human-readable form like 'u_t = a_1(t)*u*u_x + a_2(t)*u_xx'."""
        if not self.selected:
            return "u_t = 0  (no terms selected)"
        arg = "t" if self.trajectories.varying_axis == "time" else "x"
        parts = [f"a_{i + 1}({arg})*{d}" for i, d in enumerate(self.selected)]
        return "u_t = " + " + ".join(parts)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "selected": list(self.selected),
            "equation": self.rendered_equation(),
            "empty_model": self.empty_model,
            "varying_axis": self.trajectories.varying_axis,
            "descriptors": list(self.trajectories.descriptors),
            "step_coords": self.trajectories.step_coords.tolist(),
            "trajectories": self.trajectories.values.tolist(),
            "stdev": self.stdev.tolist(),
            "criteria": self.criteria,
            "loss": self.loss,
            "total_error_bar": self.total_error_bar,
            "thresholds": None
            if self.thresholds is None
            else {"t_rms": self.thresholds.t_rms, "t_ge": self.thresholds.t_ge},
            # direction convention: rms removes below its threshold, the group
            # error bar removes above (uncertainty: larger is worse)
            "threshold_convention": {"rms": "remove_below", "group_error_bar": "remove_above"},
            "bootstrap_cis": self.bootstrap_cis,
            "update_history": [
                {
                    "support_before": list(u.support_before),
                    "removed": list(u.removed),
                    "criteria": u.criteria,
                    "n_iterations": u.n_iterations,
                }
                for u in self.update_history
            ],
            "hyperparameters": self.hyperparameters,
            "provenance": self.provenance,
            "chain_medians": None if self.chain_medians is None else self.chain_medians.tolist(),
        }

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text)
        return text


def _evaluate_criteria(
    ensemble: PosteriorEnsemble, thresholds: ThresholdSpec
) -> tuple[dict, list[int]]:
    """Normalized-scale criteria per group and the indices failing any of them."""
    med = np.median(ensemble.beta, axis=0)
    s2 = np.var(ensemble.beta, axis=0, ddof=1)
    criteria: dict = {}
    failing: list[int] = []
    for g, name in enumerate(ensemble.descriptors):
        rms = rms_criterion(med[:, g])
        if rms == 0.0:
            criteria[name] = {"rms": 0.0, "group_error_bar": None, "median_zero": True}
            failing.append(g)
            continue
        ge = group_error_bar(med[:, g], s2[:, g])
        criteria[name] = {"rms": rms, "group_error_bar": ge, "median_zero": False}
        fails = False
        if thresholds.t_rms is not None and rms < thresholds.t_rms:
            fails = True
        if thresholds.t_ge is not None and ge > thresholds.t_ge:
            fails = True
        if fails:
            failing.append(g)
    return criteria, failing


def run_tbglss(
    system: GroupedLinearSystem,
    thresholds: ThresholdSpec,
    config: BglssConfig,
    update_iterations: int = DEFAULT_UPDATE_ITERATIONS,
    update_burnin: int = DEFAULT_UPDATE_BURNIN,
    final_chains: int = 1,
    provenance: dict | None = None,
    keep_final_ensemble: bool = False,
    bootstrap_ci: bool = False,
    ci_level: float = 0.95,
    ci_resamples: int = 1000,
) -> DiscoveryReport:
    """Threshold the spike-and-slab sampler until the sparsity pattern is stable.

    `config` describes the final (reported) chain; intermediate screening
    updates use the shorter update_iterations/update_burnin chain.  When a
    screening update removes nothing, the same support is re-run at the final
    length; only that confirmed update is committed, so every committed update
    except the last removes at least one group.
    """
    if not system.normalized:
        raise ValueError("run_tbglss requires a column-normalized system")

    lam = config.lam
    hyper: dict = {"pi0": config.pi0}
    if isinstance(lam, str):
        from .gibbs import estimate_hyperparams

        est = estimate_hyperparams(system, config)
        lam = est.lam
        hyper.update(
            {"lam_estimated": True, "em_converged": est.converged, "em_rounds": est.n_rounds,
             "pi0_em_mean": est.pi0}
        )
    hyper["lam"] = float(lam)
    hyper["final_iterations"] = config.n_iterations
    hyper["final_burnin"] = config.n_burnin
    hyper["update_iterations"] = update_iterations
    hyper["update_burnin"] = update_burnin

    full_descriptors = system.descriptors
    active = np.arange(system.n_groups)
    history: list[UpdateRecord] = []
    ensemble: PosteriorEnsemble | None = None
    update_idx = 0
    long_run = system.n_groups == 0

    while active.size:
        n_it, n_burn = (
            (config.n_iterations, config.n_burnin) if long_run else (update_iterations, update_burnin)
        )
        seed = int(np.random.SeedSequence((config.seed, update_idx)).generate_state(1)[0])
        sub = system.subsystem(active)
        cfg = replace(config, lam=float(lam), n_iterations=n_it, n_burnin=n_burn, seed=seed)
        ensemble = sample_posterior(sub, cfg)
        criteria, failing = _evaluate_criteria(ensemble, thresholds)
        update_idx += 1
        if failing:
            removed = tuple(sub.descriptors[g] for g in failing)
            history.append(UpdateRecord(sub.descriptors, removed, criteria, n_it))
            keep = np.setdiff1d(np.arange(active.size), failing)
            active = active[keep]
            long_run = False
            continue
        if long_run:
            history.append(UpdateRecord(sub.descriptors, (), criteria, n_it))
            break
        # screening update stabilized: confirm with the long chain on the same support
        long_run = True

    n_steps = system.n_steps
    n_groups = system.n_groups
    values = np.zeros((n_steps, n_groups))
    stdev = np.zeros((n_steps, n_groups))
    active_mask = np.zeros(n_groups, dtype=bool)
    final_criteria: dict = {}
    chain_medians = None

    if active.size:
        assert ensemble is not None
        med_norm = np.median(ensemble.beta, axis=0)
        s2_norm = np.var(ensemble.beta, axis=0, ddof=1)
        sub_scales = system.scales[:, active]
        values[:, active] = med_norm / sub_scales
        stdev[:, active] = np.sqrt(s2_norm) / sub_scales
        active_mask[active] = ~np.all(med_norm == 0.0, axis=0)
        values[:, ~active_mask] = 0.0
        stdev[:, ~active_mask] = 0.0
        final_criteria = history[-1].criteria if history else {}

        if final_chains > 1:
            medians = [med_norm / sub_scales]
            for c in range(1, final_chains):
                seed = int(
                    np.random.SeedSequence((config.seed, update_idx, c)).generate_state(1)[0]
                )
                extra = sample_posterior(
                    system.subsystem(active), replace(config, lam=float(lam), seed=seed)
                )
                medians.append(np.median(extra.beta, axis=0) / sub_scales)
            stacked = np.zeros((final_chains, n_steps, n_groups))
            stacked[:, :, active] = np.stack(medians)
            chain_medians = stacked

    trajectories = CoefficientTrajectories(
        values, active_mask, full_descriptors, system.step_coords, system.varying_axis
    )

    loss = None
    total_eb = None
    cis = None
    if active.size:
        from .selection import aic_loss, total_error_bar

        beta_full_norm = np.zeros((n_steps, n_groups))
        beta_full_norm[:, active] = np.median(ensemble.beta, axis=0)
        k = int(active_mask.sum()) * n_steps
        loss = aic_loss(system, beta_full_norm, k)
        s2_full = np.zeros((n_steps, n_groups))
        s2_full[:, active] = np.var(ensemble.beta, axis=0, ddof=1)
        total_eb = total_error_bar(beta_full_norm, s2_full, active_mask)

        if bootstrap_ci:
            from .uncertainty import ensemble_bootstrap_cis

            per_group = ensemble_bootstrap_cis(
                ensemble, level=ci_level, n_resamples=ci_resamples, base_seed=config.seed
            )
            cis = {
                "level": ci_level,
                "n_resamples": ci_resamples,
                "intervals": {
                    name: [[ci.lower, ci.upper] for ci in group] for name, group in per_group.items()
                },
            }

    return DiscoveryReport(
        trajectories=trajectories,
        stdev=stdev,
        criteria=final_criteria,
        loss=loss,
        total_error_bar=total_eb,
        update_history=tuple(history),
        thresholds=thresholds,
        method="tbglss",
        hyperparameters=hyper,
        provenance=dict(provenance or {}, seed=config.seed),
        empty_model=not bool(active_mask.any()),
        chain_medians=chain_medians,
        bootstrap_cis=cis,
        final_ensemble=ensemble if (keep_final_ensemble and active.size) else None,
    )
