"""pNML prediction, regret, and regret bounds for minimum-norm linear regression."""

__version__ = "1.0.0"

from .data import (
    IngestionError,
    RawDataset,
    RegistryEntry,
    SplitSpec,
    StandardizedView,
    load_csv,
    load_registered,
    parse_manifest,
    split,
    write_standin_csv,
)
from .experiments import (
    ExperimentRecord,
    SyntheticConfig,
    ThresholdCurve,
    aggregate_records,
    cosine_features,
    default_n_grid,
    run_double_descent,
    run_synthetic,
    run_threshold_eval,
    select_sigma_sq,
)
from .linalg import InputError, PseudoInverse, SvdFactors, pseudo_inverse, ridge_solve, svd_decompose
from .pnml import (
    ConvergenceError,
    EvaluationError,
    PnmlEvaluation,
    QuadratureConfig,
    pnml_evaluate,
    pnml_sigma_scan,
    regret_upper_bound,
    solve_lambda_for_label,
)
from .regression import (
    DegenerateDirectionError,
    DesignMatrix,
    GenieFit,
    MNModel,
    build_design,
    mn_norm_after_update,
    mn_solve,
    mn_update,
    ridge_genie_fit,
)

__all__ = [
    "__version__",
    "ConvergenceError",
    "DegenerateDirectionError",
    "DesignMatrix",
    "EvaluationError",
    "ExperimentRecord",
    "GenieFit",
    "IngestionError",
    "InputError",
    "MNModel",
    "PnmlEvaluation",
    "PseudoInverse",
    "QuadratureConfig",
    "RawDataset",
    "RegistryEntry",
    "SplitSpec",
    "StandardizedView",
    "SvdFactors",
    "SyntheticConfig",
    "ThresholdCurve",
    "aggregate_records",
    "build_design",
    "cosine_features",
    "default_n_grid",
    "load_csv",
    "load_registered",
    "mn_norm_after_update",
    "mn_solve",
    "mn_update",
    "parse_manifest",
    "pnml_evaluate",
    "pnml_sigma_scan",
    "pseudo_inverse",
    "regret_upper_bound",
    "ridge_genie_fit",
    "ridge_solve",
    "run_double_descent",
    "run_synthetic",
    "run_threshold_eval",
    "select_sigma_sq",
    "solve_lambda_for_label",
    "split",
    "svd_decompose",
    "write_standin_csv",
]
