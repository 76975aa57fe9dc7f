"""exitcast: exit-outcome prediction for early-stage companies.

Feature engineering from the first three funding rounds, three from-scratch
classifiers (logistic regression, random forest, RBF-kernel SVM), PCA
reduction, balanced resampling, k-fold evaluation with ROC threshold
selection, and a fused majority/unanimity decision model.
"""

__version__ = "0.1.0"

from .domain import (
    BinaryLabel,
    CompanyRecord,
    ExitStatus,
    LabelMapping,
    RoundRecord,
    aggregate_label,
    censor_filter,
)
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    InvestorIndex,
    build_investor_index,
    featurize,
    featurize_all,
)
from .sampling import FoldAssignment, balance, kfold
from .pca import PCAModel, cumulative_variance, pca_fit, pca_transform
from .logreg import LogisticModel, logit_prob, logreg_fit
from .forest import ForestModel, forest_fit, forest_prob, tree_fit
from .svm import SVMModel, TuneResult, platt_fit, rbf_kernel, svm_fit, svm_prob, svm_tune
from .evaluation import (
    ConfusionCounts,
    MetricsReport,
    ROCCurve,
    cross_validate,
    knee,
    metrics,
    roc,
    threshold_label,
)
from .fusion import (
    FusionReport,
    TriplePrediction,
    fuse_majority,
    fuse_unanimity,
    voting_dynamics,
)
from .ingest import (
    ExitSummary,
    LoadResult,
    SyntheticConfig,
    generate_synthetic,
    load_csv,
    summarize,
    write_csv,
)
from .experiment import ExperimentConfig, ExperimentResult, run_experiment
