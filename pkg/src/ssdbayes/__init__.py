"""Bayesian nonparametric species sensitivity distributions.

Censored-data mixture inference with a normalized stable process prior,
hazardous-concentration quantile posteriors, frequentist baselines,
decision-theoretic species clustering, and cross-contaminant non-negative
tensor factorization.
"""

__version__ = "0.1.0"

from ._jit import JIT_ENABLED
from .baselines import (
    KDEFit,
    NormalFit,
    fit_kde,
    fit_normal,
    kde_bootstrap_ci,
    kde_quantile,
    normal_hc_ci,
)
from .clustering import (
    binder_loss,
    canonicalize,
    expected_loss,
    greedy_point_estimate,
    psm,
    vi_loss,
)
from .data_model import (
    CensoredValue,
    ConcentrationRecord,
    LogTransform,
    StandardizedSample,
    aggregate_species,
    back_transform,
    log_standardize,
    parse_csv,
    standardize_log_values,
)
from .mixture import (
    MCMCConfig,
    MixtureDraw,
    PosteriorChain,
    PriorConfig,
    effective_sample_size,
    kernel_contribution,
    predictive_cdf,
    predictive_density,
    sample_posterior,
    truncate_jumps,
)
from .risk import (
    MetricsReport,
    QuantilePosterior,
    Scenario,
    cpo,
    hc_quantile_posterior,
    loo_refit,
    run_simulation,
)
from .tensor import (
    AssociationTensor,
    FactorSet,
    RankSelection,
    build_tensor,
    cv_rank_select,
    kmeans2_threshold,
    nncp_decompose,
    reconstruct,
)
