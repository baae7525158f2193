"""Aggregated representation learning with cross-validated model averaging."""

from .baselines import BASELINES, run_baseline
from .bench import (
    ExperimentRow,
    SuiteSettings,
    SyntheticConfig,
    emit_report,
    generate_synthetic,
    run_synthetic_suite,
    run_weight_consistency,
)
from .candidates import (
    CandidatePool,
    CandidateSpec,
    enumerate_frl_subsets,
    enumerate_fusion_columns,
    realize,
)
from .core import (
    CLASSIFICATION,
    CROSS_ENTROPY,
    HINGE,
    REGRESSION,
    SQUARED_ERROR,
    LabeledDataset,
    PredictionBlock,
    UnlabeledDataset,
    loss_gradient_wrt_pred,
    loss_value,
    metric_suite,
    read_labeled_csv,
    seeded_rng,
)
from .downstream import DownstreamConfig, fit_ridge, fit_softmax
from .frl import FittedFrl, KernelSpec, fit_frl, fit_kpca, fit_pca, register_frl
from .weights import (
    CvPlan,
    PearlModel,
    SOLVER_BACKEND,
    cv_predictions,
    make_cv_plan,
    pearl_fit,
    pearl_fit_predict,
    project_to_simplex,
    solve_weights,
    solve_weights_naive,
)

__version__ = "0.1.0"
