import numpy as np
import pytest

from vcpde.library import GroupedLinearSystem, LibrarySpec, normalize_columns
from vcpde.pipeline import build_system, simulate_dataset
from vcpde.solvers import burgers_scenario, solve_burgers


@pytest.fixture(scope="session")
def burgers_scenario_full():
    return burgers_scenario()


@pytest.fixture(scope="session")
def burgers_field(burgers_scenario_full):
    return solve_burgers(burgers_scenario_full)


@pytest.fixture(scope="session")
def burgers_dataset(burgers_scenario_full):
    return simulate_dataset(burgers_scenario_full, noise_level=0.0, seed=1)


@pytest.fixture(scope="session")
def burgers_system(burgers_dataset):
    return build_system(burgers_dataset)


@pytest.fixture(scope="session")
def library20():
    return LibrarySpec.standard()


def random_grouped_system(rng, n_steps=4, n_rows=10, n_groups=5, normalize=True):
    """A small random block-diagonal system with a random sparse truth."""
    blocks = rng.standard_normal((n_steps, n_rows, n_groups))
    beta_true = np.zeros((n_steps, n_groups))
    active = rng.choice(n_groups, size=2, replace=False)
    beta_true[:, active] = rng.standard_normal((n_steps, active.size)) + 2.0
    target = np.einsum("mng,mg->mn", blocks, beta_true)
    target += 0.01 * rng.standard_normal(target.shape)
    system = GroupedLinearSystem(
        blocks,
        target,
        tuple(f"g{i}" for i in range(n_groups)),
        "time",
        np.arange(n_steps, dtype=float),
    )
    return (normalize_columns(system) if normalize else system), beta_true, active
