"""Error bands from posterior draws and bootstrap confidence intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gibbs import PosteriorEnsemble, posterior_median, posterior_variance

MIN_DRAWS = 30
MIN_RESAMPLES = 200


@dataclass(frozen=True)
class ErrorBandSet:
    """Median-centered one-standard-deviation bands per coefficient.

    magnification is a presentation hint only (bands are often thinner than
    the plotted line); stored half-widths are never scaled by it.
    """

    center: np.ndarray  # (n_steps, n_groups)
    halfwidth: np.ndarray  # (n_steps, n_groups), >= 0
    descriptors: tuple[str, ...]
    step_coords: np.ndarray
    magnification: float = 1.0

    def __post_init__(self):
        if np.any(self.halfwidth < 0):
            raise ValueError("half-widths must be nonnegative")
        if self.center.shape != self.halfwidth.shape:
            raise ValueError("center and halfwidth shapes differ")


def error_bands(
    ensemble: PosteriorEnsemble, scale: str = "physical", magnification: float = 1.0
) -> ErrorBandSet:
    """Bands centered on the posterior median with one-sigma half-widths."""
    med = posterior_median(ensemble, scale=scale)
    halfwidth = np.sqrt(posterior_variance(ensemble, scale=scale))
    return ErrorBandSet(
        center=med.values,
        halfwidth=halfwidth,
        descriptors=med.descriptors,
        step_coords=med.step_coords,
        magnification=magnification,
    )


@dataclass(frozen=True)
class BootstrapCI:
    """Percentile bootstrap confidence interval for a median estimator."""

    point: float
    lower: float
    upper: float
    level: float
    n_resamples: int
    seed: int

    def __post_init__(self):
        if not self.lower <= self.point <= self.upper:
            raise ValueError("confidence interval must bracket the point estimate")

    @property
    def width(self) -> float:
        return self.upper - self.lower


def bootstrap_median_ci(
    draws: np.ndarray,
    level: float = 0.95,
    n_resamples: int = 1000,
    seed: int = 0,
) -> BootstrapCI:
    """Resample with replacement, re-take the median, read off percentiles."""
    draws = np.asarray(draws, dtype=float).ravel()
    if draws.size < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} draws, got {draws.size}")
    if n_resamples < MIN_RESAMPLES:
        raise ValueError(f"need at least {MIN_RESAMPLES} resamples")
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, draws.size, size=(n_resamples, draws.size))
    medians = np.median(draws[idx], axis=1)
    lo, hi = np.percentile(medians, [50.0 * (1.0 - level), 50.0 * (1.0 + level)])
    point = float(np.median(draws))
    return BootstrapCI(
        point=point,
        lower=min(float(lo), point),
        upper=max(float(hi), point),
        level=level,
        n_resamples=n_resamples,
        seed=seed,
    )


def coefficient_seed(base_seed: int, group: int, step: int) -> int:
    """Deterministic per-coefficient seed for parallel resampling."""
    return int(np.random.SeedSequence((base_seed, group, step)).generate_state(1)[0])


def ensemble_bootstrap_cis(
    ensemble: PosteriorEnsemble,
    level: float = 0.95,
    n_resamples: int = 1000,
    base_seed: int = 0,
    scale: str = "physical",
) -> dict:
    """Bootstrap CIs for every coefficient of every active group."""
    med = posterior_median(ensemble, scale=scale)
    out: dict = {}
    for g in np.flatnonzero(med.active):
        name = ensemble.descriptors[g]
        draws_g = ensemble.beta[:, :, g]
        if scale == "physical":
            draws_g = draws_g / ensemble.scales[None, :, g]
        out[name] = [
            bootstrap_median_ci(
                draws_g[:, i], level, n_resamples, coefficient_seed(base_seed, int(g), i)
            )
            for i in range(draws_g.shape[1])
        ]
    return out
