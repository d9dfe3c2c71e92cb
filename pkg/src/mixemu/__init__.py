"""Diagnostic-led nonstationary Gaussian-process emulation.

Workflow: fit a stationary GP, classify its leave-one-out residuals into
behavioural regions with a Bayesian mixture model, then fit a single
continuous GP whose covariance mixes region-specific stationary kernels.
"""

__version__ = "0.1.0"

from .design import Design, Standardizer, extend_lhc, extended_lhc, maximin_lhc, standardize
from .kernels import (
    CorrelationSpec,
    StationaryKernelSpec,
    kernel_matrix,
    power_exp_corr,
    safe_cholesky,
    stationary_cov,
)
from .mixture import (
    FeatureMap,
    MixtureFit,
    MixturePrior,
    fit_mixture,
    mixing_weights,
    mixture_marginal_log_posterior,
    select_regions,
    waic,
)
from .nonstationary import (
    FittedNonstationaryGP,
    RegionKernelSet,
    fit_nonstationary,
    mixture_cov,
    predict_nonstationary,
    region_indicator,
)
from .pipeline import PipelinePredictor, run_pipeline
from .sampler import (
    DrawSet,
    SamplerConfig,
    convergence_diagnostics,
    sample_posterior,
)
from .stationary import (
    FittedStationaryGP,
    GPPrior,
    fit_stationary,
    loo_standardized_residuals,
    predict_stationary,
    stationary_log_posterior,
)
from .testfns import piecewise5d, wavy2d
from .validation import interval_score, lolho_report, rmse, score_predictions
