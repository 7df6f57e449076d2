"""IRMv1 against ERM on linear structural-equation unit tests."""

from invbench._harness import (
    OutputDirectoryError,
    SweepConfig,
    SweepOutcome,
    TrialData,
    comparison_table,
    load_sweep_config,
    run_sweep,
    run_trial,
    sample_trial_data,
    sweep_config_from_dict,
    sweep_config_to_dict,
    trace_trial,
    trial_seed,
    worker_count,
)
from invbench._metrics import (
    RESULT_COLUMNS,
    Evaluation,
    MetricSummary,
    Method,
    TrialResult,
    TrialStatus,
    evaluate,
    regressor_coverage,
    summarize,
)
from invbench._oracle import (
    DEFAULT_JITTER,
    PopulationMoments,
    SingularCovarianceError,
    pooled_population_regressor,
    population_moments,
)
from invbench._scm_env import (
    CausalWeights,
    EnvDataset,
    GroundTruth,
    InvalidConfigError,
    NoiseModel,
    ScmConfig,
    ScmTemplate,
    Setting,
    derive_seed,
    sample_environment,
    sample_ground_truth,
    substream,
)
from invbench._solvers import (
    DimensionMismatchError,
    GradientCheckReport,
    IrmHyperparams,
    NonFiniteObjectiveError,
    Regressor,
    SgdHyperparams,
    SingularDesignError,
    TraceRecord,
    empirical_risk,
    erm_analytic,
    erm_sgd,
    finite_difference_grad,
    gradient_check,
    irm_objective,
    irm_objective_grad,
    irm_penalty,
    irm_stationarity,
    random_init,
    train_irmv1,
)

__all__ = [
    "DEFAULT_JITTER",
    "RESULT_COLUMNS",
    "CausalWeights",
    "DimensionMismatchError",
    "EnvDataset",
    "Evaluation",
    "GradientCheckReport",
    "GroundTruth",
    "InvalidConfigError",
    "IrmHyperparams",
    "Method",
    "MetricSummary",
    "NoiseModel",
    "NonFiniteObjectiveError",
    "OutputDirectoryError",
    "PopulationMoments",
    "Regressor",
    "ScmConfig",
    "ScmTemplate",
    "Setting",
    "SgdHyperparams",
    "SingularCovarianceError",
    "SingularDesignError",
    "SweepConfig",
    "SweepOutcome",
    "TraceRecord",
    "TrialData",
    "TrialResult",
    "TrialStatus",
    "comparison_table",
    "derive_seed",
    "empirical_risk",
    "erm_analytic",
    "erm_sgd",
    "evaluate",
    "finite_difference_grad",
    "gradient_check",
    "irm_objective",
    "irm_objective_grad",
    "irm_penalty",
    "irm_stationarity",
    "load_sweep_config",
    "pooled_population_regressor",
    "population_moments",
    "random_init",
    "regressor_coverage",
    "run_sweep",
    "run_trial",
    "sample_environment",
    "sample_ground_truth",
    "sample_trial_data",
    "substream",
    "summarize",
    "sweep_config_from_dict",
    "sweep_config_to_dict",
    "trace_trial",
    "train_irmv1",
    "trial_seed",
    "worker_count",
]
