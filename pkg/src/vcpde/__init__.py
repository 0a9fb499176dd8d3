"""Discovery of PDEs with time- or space-varying coefficients from gridded data."""

from .baselines import GroupLassoConfig, SgtrConfig, group_lasso, sgtr
from .differentiation import DerivativeStack, build_derivative_stack, differentiate
from .fields import SpatioTemporalField
from .filters import FilterSpec, apply_filter, data_mse, filter_sweep
from .gibbs import (
    BglssConfig,
    PosteriorEnsemble,
    estimate_hyperparams,
    posterior_median,
    posterior_variance,
    sample_posterior,
)
from .library import (
    CoefficientTrajectories,
    GroupedLinearSystem,
    LibrarySpec,
    Term,
    assemble_grouped_system,
    evaluate_terms,
    normalize_columns,
)
from .pipeline import (
    Dataset,
    DifferentiationSpec,
    MethodConfig,
    build_system,
    discover,
    filter_dataset,
    simulate_dataset,
)
from .selection import aic_loss, coefficient_mse, sweep, total_error_bar
from .solvers import (
    PdeScenario,
    TrueCoefficients,
    add_noise,
    advection_diffusion_scenario,
    burgers_scenario,
    ks_scenario,
    solve,
    solve_advection_diffusion,
    solve_burgers,
    solve_ks,
    true_coefficients,
)
from .tbglss import DiscoveryReport, ThresholdSpec, group_error_bar, rms_criterion, run_tbglss
from .uncertainty import BootstrapCI, bootstrap_median_ci, error_bands

__version__ = "0.1.0"
