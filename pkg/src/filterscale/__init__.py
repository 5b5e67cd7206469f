"""Scaling laws for data filtering under repetition.

Fit per-pool scaling constants from (samples seen, error) logs, predict the
loss curve of any mixture of quality pools without training on it, and pick
the filtering strategy that is best at each compute budget.
"""

from ._backend import backend_name
from .core import (
    DomainError,
    EpochSchedule,
    UtilityParams,
    delta_from_tau,
    eval_loss,
    eval_losses,
    instantaneous_utility,
    utility_at_epoch,
)
from .curation import (
    BucketLadder,
    StrategyReport,
    crossover_budgets,
    enumerate_strategies,
    predict_report,
)
from .fitting import (
    FitResult,
    ParamGrid,
    PoolFit,
    PoolObservations,
    SearchError,
    fit_joint,
    fit_single_pool,
    l2_fit_loss,
    sweep_k_exponent,
)
from .mixture import (
    EffectiveDataState,
    MixtureSpec,
    Pool,
    b_eff_effective_data,
    effective_utility,
    eval_loss_f3,
    eval_mixture_loss,
    n_effective,
    rescale_tau,
    step_log_ratios,
)
from .simulate import (
    ConfigurationError,
    SimConfig,
    Trajectory,
    generate_mixture_observations,
    generate_observations,
    integrate_mixture,
    integrate_single,
)

__version__ = "0.1.0"
