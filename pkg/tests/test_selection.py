import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcpde.gibbs import BglssConfig
from vcpde.library import CoefficientTrajectories, GroupedLinearSystem, normalize_columns
from vcpde.selection import (
    SelectionCurve,
    aic_loss,
    coefficient_mse,
    default_grid,
    sweep,
    total_error_bar,
)
from vcpde.solvers import TrueCoefficients

from conftest import random_grouped_system


def perfect_fit_system(seed=0, n_steps=3, n_rows=8, n_groups=4):
    rng = np.random.default_rng(seed)
    blocks = rng.standard_normal((n_steps, n_rows, n_groups))
    beta = np.zeros((n_steps, n_groups))
    beta[:, 2] = 1.7
    target = np.einsum("mng,mg->mn", blocks, beta)
    system = normalize_columns(GroupedLinearSystem(
        blocks, target, tuple("abcd"), "time", np.arange(float(n_steps))))
    return system, beta * system.scales  # normalized-scale coefficients


class TestAicLoss:
    def test_perfect_fit_floor(self):
        system, beta_norm = perfect_fit_system()
        n_obs = system.n_observations
        loss = aic_loss(system, beta_norm, k=0, epsilon=1e-6)
        assert loss == pytest.approx(n_obs * np.log(1e-6), rel=1e-9)

    def test_k_additivity(self):
        system, beta_norm = perfect_fit_system()
        m = system.n_steps
        base = aic_loss(system, beta_norm, k=m)
        bigger = aic_loss(system, beta_norm, k=2 * m)
        assert bigger - base == pytest.approx(2 * m)

    @settings(max_examples=25, deadline=None)
    @given(eps1=st.floats(1e-8, 1e-2), eps2=st.floats(1e-8, 1e-2))
    def test_epsilon_decomposition(self, eps1, eps2):
        system, beta_norm = perfect_fit_system(seed=3)
        beta = 0.5 * beta_norm  # imperfect fit
        n_obs = system.n_observations
        rss = system.residual_norm_sq(beta) / float((system.target**2).sum())
        l1 = aic_loss(system, beta, k=0, epsilon=eps1)
        l2 = aic_loss(system, beta, k=0, epsilon=eps2)
        expected = n_obs * (np.log(rss / n_obs + eps1) - np.log(rss / n_obs + eps2))
        assert l1 - l2 == pytest.approx(expected, rel=1e-9)

    def test_true_support_beats_supersets_on_clean_burgers(self, burgers_system, library20):
        from vcpde.library import lstsq_trajectories

        m = burgers_system.n_steps
        true_idx = [library20.descriptors.index(n) for n in ("u*u_x", "u_xx")]
        losses = {}
        for extra in (None, "u", "u_xxx", "u^2*u_xx"):
            idx = list(true_idx)
            if extra is not None:
                idx.append(library20.descriptors.index(extra))
            sub = burgers_system.subsystem(np.array(sorted(idx)))
            beta_sub = lstsq_trajectories(sub)
            beta = np.zeros((m, burgers_system.n_groups))
            beta[:, sorted(idx)] = beta_sub
            losses[extra] = aic_loss(burgers_system, beta, k=len(idx) * m)
        assert all(losses[None] < v for k, v in losses.items() if k is not None)

    def test_epsilon_positive_required(self):
        system, beta_norm = perfect_fit_system()
        with pytest.raises(ValueError):
            aic_loss(system, beta_norm, k=0, epsilon=0.0)


class TestTotalErrorBar:
    def test_empty_model_zero(self):
        assert total_error_bar(np.zeros((4, 3)), np.ones((4, 3))) == 0.0

    def test_two_groups_additivity(self):
        beta = np.ones((2, 2))
        s2 = np.full((2, 2), 0.02)
        assert total_error_bar(beta, s2) == pytest.approx(0.04)

    def test_disjoint_additivity(self):
        rng = np.random.default_rng(0)
        beta = rng.standard_normal((3, 4))
        s2 = rng.random((3, 4))
        left = np.array([True, True, False, False])
        right = ~left
        total = total_error_bar(beta, s2, np.ones(4, dtype=bool))
        assert total == pytest.approx(
            total_error_bar(beta, s2, left) + total_error_bar(beta, s2, right))

    def test_active_zero_norm_rejected(self):
        beta = np.zeros((3, 2))
        beta[:, 0] = 1.0
        with pytest.raises(ValueError):
            total_error_bar(beta, np.ones((3, 2)), np.array([True, True]))


def make_trajectories(values, coords=None):
    values = np.asarray(values, dtype=float)
    active = ~np.all(values == 0.0, axis=0)
    coords = np.arange(float(values.shape[0])) if coords is None else coords
    return CoefficientTrajectories(values, active,
                                   tuple(f"g{i}" for i in range(values.shape[1])), coords, "time")


def make_truth(values, coords=None):
    values = np.asarray(values, dtype=float)
    coords = np.arange(float(values.shape[0])) if coords is None else coords
    return TrueCoefficients(values, tuple(f"g{i}" for i in range(values.shape[1])), coords, "time")


class TestCoefficientMse:
    def test_identical_zero(self):
        est = make_trajectories([[1.0, 0.0], [2.0, 0.0]])
        truth = make_truth([[1.0, 0.0], [2.0, 0.0]])
        assert coefficient_mse(est, truth) == 0.0

    def test_includes_absent_terms(self):
        est = make_trajectories([[1.0, 0.0], [1.0, 0.0]])
        truth = make_truth([[0.0, 1.0], [0.0, 1.0]])
        assert coefficient_mse(est, truth) == pytest.approx(1.0)

    def test_symmetry(self):
        a = [[1.0, 0.5], [2.0, 0.0]]
        b = [[0.5, 1.0], [0.0, 2.0]]
        forward = coefficient_mse(make_trajectories(a), make_truth(b))
        backward = coefficient_mse(make_trajectories(b), make_truth(a))
        assert forward == pytest.approx(backward)

    def test_grid_mismatch_rejected(self):
        est = make_trajectories([[1.0], [2.0]], coords=np.array([0.0, 1.0]))
        truth = make_truth([[1.0], [2.0]], coords=np.array([0.0, 2.0]))
        with pytest.raises(ValueError, match="grids"):
            coefficient_mse(est, truth)


class TestSweep:
    def test_single_point_grid(self):
        rng = np.random.default_rng(1)
        system, _, _ = random_grouped_system(rng, n_rows=16)
        curve = sweep(system, "t_rms", np.array([0.05]), method="tbglss",
                      fixed={"t_ge": 0.5},
                      config=BglssConfig(n_iterations=150, n_burnin=40, lam=1.0, seed=0))
        assert len(curve.points) == 1
        assert curve.argmin["loss"] == 0.05

    def test_constant_support_loss_varies_only_with_fit(self):
        rng = np.random.default_rng(2)
        system, _, active_truth = random_grouped_system(rng, n_rows=24)
        grid = np.array([0.02, 0.05])  # both below every true group's scale
        curve = sweep(system, "t_rms", grid, method="tbglss", fixed={"t_ge": 10.0},
                      config=BglssConfig(n_iterations=200, n_burnin=60, lam=1.0, seed=1))
        supports = {p.selected for p in curve.points}
        assert len(supports) == 1

    def test_axis_method_mismatch_rejected(self):
        rng = np.random.default_rng(3)
        system, _, _ = random_grouped_system(rng)
        with pytest.raises(ValueError, match="group_lasso"):
            sweep(system, "lambda", np.array([0.5, 1.0]), method="tbglss")

    def test_point_failures_recorded_not_fatal(self):
        # duplicated columns + zero ridge make every sgtr point singular
        rng = np.random.default_rng(3)
        col = rng.standard_normal((3, 8, 1))
        blocks = np.concatenate([col, col], axis=2)
        system = normalize_columns(GroupedLinearSystem(
            blocks, col[:, :, 0] * 2.0, ("a", "b"), "time", np.arange(3.0)))
        curve = sweep(system, "sgtr_threshold", np.array([0.01, 0.1]), method="sgtr",
                      fixed={"ridge": 0.0})
        assert all(p.error is not None for p in curve.points)
        assert curve.argmin == {}

    def test_lambda_sweep_records_loss(self):
        rng = np.random.default_rng(4)
        system, _, _ = random_grouped_system(rng, n_rows=16)
        grid = default_grid("lambda", system)[::5]
        curve = sweep(system, "lambda", grid, method="group_lasso")
        ok = [p for p in curve.points if p.error is None]
        assert ok and all(p.loss is not None for p in ok)
        assert all(p.total_error_bar is None for p in ok)

    def test_sgtr_threshold_sweep(self):
        system, beta_norm = perfect_fit_system(seed=5)
        curve = sweep(system, "sgtr_threshold", np.array([0.01, 1e6]), method="sgtr")
        assert curve.points[0].selected == ("c",)
        assert curve.points[1].selected == ()

    def test_grid_must_increase(self):
        rng = np.random.default_rng(6)
        system, _, _ = random_grouped_system(rng)
        with pytest.raises(ValueError):
            sweep(system, "t_rms", np.array([0.2, 0.1]), method="tbglss", fixed={"t_ge": 0.5})

    def test_csv_and_json_outputs(self, tmp_path):
        system, _ = perfect_fit_system(seed=7)
        curve = sweep(system, "sgtr_threshold", np.array([0.01, 0.5]), method="sgtr")
        curve.to_csv(tmp_path / "curve.csv")
        curve.to_json(tmp_path / "curve.json")
        text = (tmp_path / "curve.csv").read_text()
        assert "sgtr_threshold" in text.splitlines()[0]
        assert (tmp_path / "curve.json").exists()
