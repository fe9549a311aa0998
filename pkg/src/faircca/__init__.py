"""Fair canonical correlation analysis on generalized Stiefel manifolds."""

from .cca import (
    CcaSolution,
    GroupedDataset,
    GroupOptimum,
    correlation_profile,
    solve_cca,
    solve_group_cca,
    standardize,
)
from .errors import ConfigError, FairCcaError, NumericalError
from .fairness import (
    FairnessReport,
    PenaltyKind,
    component_metrics,
    fairness_report,
    matrix_metrics,
    percentage_change,
)
from .optim import (
    FairCcaResult,
    OptimizerConfig,
    cca_fit,
    fit,
    mf_cca_fit,
    sf_cca_fit,
)
from .synth import SynthSpec, benchmark_profile, make_synthetic_grouped

__version__ = "0.1.0"
