"""Model evaluation criteria and parameter sweeps.

Three criteria: an AIC-inspired loss on the normalized system, the total error
bar (summed group error bars, a posterior-confidence score), and, when ground
truth is available, the mean square error of the recovered coefficients.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .library import CoefficientTrajectories, GroupedLinearSystem
from .solvers import TrueCoefficients
from .tbglss import group_error_bar

DEFAULT_EPSILON = 1e-6

SWEEP_AXES = ("t_rms", "t_ge", "lambda", "sgtr_threshold")


def aic_loss(
    system: GroupedLinearSystem,
    beta: np.ndarray,
    k: int,
    epsilon: float = DEFAULT_EPSILON,
    n_obs: int | None = None,
) -> float:
    """N * ln(mean squared residual of the fully normalized system + eps) + 2k.

    `beta` is in the normalized column scaling of `system`; the target is
    additionally scaled by its global L2 norm inside the loss only, and k
    counts nonzero coefficients (active groups x steps).  N defaults to the
    row count of the assembled system.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if beta.shape != (system.n_steps, system.n_groups):
        raise ValueError("beta shape does not match the system")
    if n_obs is None:
        n_obs = system.n_observations
    rss = system.residual_norm_sq(beta)
    yty = float((system.target**2).sum())
    return float(n_obs * np.log(rss / (yty * n_obs) + epsilon) + 2 * k)


def total_error_bar(beta: np.ndarray, s2: np.ndarray, active: np.ndarray | None = None) -> float:
    """Sum of group error bars over the active groups; lower is more confident."""
    beta = np.asarray(beta, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    if beta.shape != s2.shape:
        raise ValueError("beta and s2 shapes differ")
    if active is None:
        active = ~np.all(beta == 0.0, axis=0)
    total = 0.0
    for g in np.flatnonzero(active):
        total += group_error_bar(beta[:, g], s2[:, g])  # raises on zero-norm active group
    return float(total)


def coefficient_mse(estimated: CoefficientTrajectories, truth: TrueCoefficients) -> float:
    """Mean squared coefficient error over every (term, step) pair."""
    if estimated.descriptors != truth.descriptors:
        raise ValueError("term libraries differ between estimate and truth")
    if estimated.step_coords.shape != truth.step_coords.shape or not np.allclose(
        estimated.step_coords, truth.step_coords, rtol=0, atol=1e-9
    ):
        raise ValueError("step grids differ between estimate and truth")
    return float(np.mean((estimated.values - truth.values) ** 2))


@dataclass(frozen=True)
class SweepPoint:
    value: float
    loss: float | None
    total_error_bar: float | None
    coefficient_mse: float | None
    selected: tuple[str, ...]
    error: str | None = None


@dataclass(frozen=True)
class SelectionCurve:
    axis: str
    points: tuple[SweepPoint, ...]
    argmin: dict  # criterion name -> swept value

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [self.axis, "loss", "total_error_bar", "coefficient_mse", "selected", "error"]
            )
            for p in self.points:
                writer.writerow(
                    [
                        repr(p.value),
                        "" if p.loss is None else repr(p.loss),
                        "" if p.total_error_bar is None else repr(p.total_error_bar),
                        "" if p.coefficient_mse is None else repr(p.coefficient_mse),
                        "+".join(p.selected),
                        p.error or "",
                    ]
                )

    def summary(self) -> dict:
        return {
            "axis": self.axis,
            "grid": [p.value for p in self.points],
            "argmin": self.argmin,
            "n_failed": sum(1 for p in self.points if p.error),
        }

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True))

    def point_at(self, value: float) -> SweepPoint:
        for p in self.points:
            if p.value == value:
                return p
        raise KeyError(f"no sweep point at {value!r}")


def sweep(
    system: GroupedLinearSystem,
    axis: str,
    grid: np.ndarray,
    method: str = "tbglss",
    fixed: dict | None = None,
    truth: TrueCoefficients | None = None,
    config=None,
    **method_kwargs,
) -> SelectionCurve:
    """Run the chosen method once per grid point and record all criteria.

    fixed holds the non-swept parameters (e.g. t_rms while sweeping t_ge).
    Individual point failures are recorded on the curve, not raised.
    """
    from .baselines import GroupLassoConfig, SgtrConfig, group_lasso, sgtr
    from .gibbs import BglssConfig
    from .tbglss import ThresholdSpec, run_tbglss

    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("sweep grid must be nonempty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("sweep grid must be strictly increasing")
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    required_method = {"t_rms": "tbglss", "t_ge": "tbglss", "lambda": "group_lasso",
                       "sgtr_threshold": "sgtr"}[axis]
    if method != required_method:
        raise ValueError(f"axis {axis!r} applies to the {required_method} method")
    fixed = dict(fixed or {})
    points = []
    for value in grid:
        try:
            points.append(
                _run_point(system, axis, float(value), method, fixed, truth, config, method_kwargs)
            )
        except Exception as exc:  # per-point failures recorded, not fatal
            points.append(
                SweepPoint(float(value), None, None, None, (), error=f"{type(exc).__name__}: {exc}")
            )
    argmin = {}
    for crit in ("loss", "total_error_bar", "coefficient_mse"):
        best = [(getattr(p, crit), p.value) for p in points if getattr(p, crit) is not None]
        if best:
            argmin[crit] = min(best)[1]
    return SelectionCurve(axis, tuple(points), argmin)


def _run_point(system, axis, value, method, fixed, truth, config, method_kwargs) -> SweepPoint:
    from .baselines import GroupLassoConfig, SgtrConfig, group_lasso, sgtr
    from .gibbs import BglssConfig
    from .tbglss import ThresholdSpec, run_tbglss

    n_steps = system.n_steps
    if axis in ("t_rms", "t_ge"):
        thresholds = ThresholdSpec(
            t_rms=value if axis == "t_rms" else fixed.get("t_rms"),
            t_ge=value if axis == "t_ge" else fixed.get("t_ge"),
        )
        cfg = config or BglssConfig()
        report = run_tbglss(system, thresholds, cfg, **method_kwargs)
        trajectories = report.trajectories
        loss = report.loss
        teb = report.total_error_bar
        if loss is None:  # empty model: loss of the zero fit
            loss = aic_loss(system, np.zeros((n_steps, system.n_groups)), 0)
            teb = 0.0
    elif axis == "lambda":
        result = group_lasso(system, GroupLassoConfig(lam=value, **fixed))
        trajectories = result.trajectories
        k = int(trajectories.active.sum()) * n_steps
        loss = aic_loss(system, result.beta_normalized, k)
        teb = None
    else:  # sgtr_threshold
        trajectories = sgtr(system, SgtrConfig(threshold=value, **fixed))
        beta_norm = trajectories.values * system.scales
        k = int(trajectories.active.sum()) * n_steps
        loss = aic_loss(system, beta_norm, k)
        teb = None

    mse = None if truth is None else coefficient_mse(trajectories, truth)
    return SweepPoint(value, loss, teb, mse, trajectories.selected)


def default_grid(axis: str, system: GroupedLinearSystem | None = None) -> np.ndarray:
    """Built-in sweep grids used when a run does not supply its own."""
    if axis == "t_rms":
        return np.logspace(-3, 0, 20)
    if axis == "t_ge":
        return np.linspace(0.02, 0.22, 11)
    if axis == "lambda":
        from .baselines import group_lasso_null_threshold

        if system is None:
            raise ValueError("lambda grid needs the system for its null threshold")
        lam_max = group_lasso_null_threshold(system)
        return np.logspace(np.log10(lam_max) - 4, np.log10(lam_max), 20)
    if axis == "sgtr_threshold":
        return np.logspace(-3, 0, 20)
    raise ValueError(f"unknown axis {axis!r}")
