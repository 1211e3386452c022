"""Two-tier hybrid learner.

A frozen random-feature tier fit in one closed-form regularized pass, an
incremental softmax head trained by SGD with elastic weight consolidation,
and a fixed-point datapath emulation with a declared op/energy cost model.
"""

from .compound import (
    CompoundModel,
    ForgettingMetrics,
    build_and_fit_lower,
    forgetting_metrics,
    train_sequence,
)
from .config import ExperimentConfig, load_config
from .costs import CostReport, build_cost_report, count_direct_ops, count_sgd_ops
from .errors import (
    ConfigError,
    FixedPointNotPositiveDefiniteError,
    NotPositiveDefiniteError,
    NumericError,
    ShapeError,
    StateError,
)
from .fixedpoint import FixedPointFormat, emulate_direct_solve, fixed_mac, quantize
from .linalg import CholeskyFactor, add_scaled_identity, cholesky_spd, matmul, solve_spd
from .lower import (
    FeatureMap,
    NormalEqAccumulator,
    RidgeSolution,
    apply_features,
    init_feature_map,
    predict,
    solve_ridge,
)
from .runner import RunArtifacts, build_stream, run_experiment
from .tasks import TaskStream, gen_task_stream
from .upper import (
    EwcState,
    Head,
    TaskBatch,
    consolidate,
    estimate_fisher,
    ewc_penalty,
    forward_loss,
    sgd_step,
)

__version__ = "0.1.0"

__all__ = [
    "CholeskyFactor",
    "CompoundModel",
    "ConfigError",
    "CostReport",
    "EwcState",
    "ExperimentConfig",
    "FeatureMap",
    "FixedPointFormat",
    "FixedPointNotPositiveDefiniteError",
    "ForgettingMetrics",
    "Head",
    "NormalEqAccumulator",
    "NotPositiveDefiniteError",
    "NumericError",
    "RidgeSolution",
    "RunArtifacts",
    "ShapeError",
    "StateError",
    "TaskBatch",
    "TaskStream",
    "add_scaled_identity",
    "apply_features",
    "build_and_fit_lower",
    "build_cost_report",
    "build_stream",
    "cholesky_spd",
    "consolidate",
    "count_direct_ops",
    "count_sgd_ops",
    "emulate_direct_solve",
    "estimate_fisher",
    "ewc_penalty",
    "fixed_mac",
    "forgetting_metrics",
    "forward_loss",
    "gen_task_stream",
    "init_feature_map",
    "load_config",
    "matmul",
    "predict",
    "quantize",
    "run_experiment",
    "sgd_step",
    "solve_ridge",
    "solve_spd",
    "train_sequence",
    "__version__",
]
