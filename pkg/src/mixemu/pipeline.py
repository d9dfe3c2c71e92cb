"""End-to-end orchestration: stationary fit, diagnostics, region selection,
nonstationary fit, and validation reports."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve

from .design import standardize
from .mixture import FeatureMap, select_regions
from .nonstationary import fit_nonstationary, predict_nonstationary
from .stationary import (
    fit_stationary,
    loo_standardized_residuals,
    mean_basis,
    predict_stationary,
)
from .validation import score_predictions


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineResult:
    standardizer: object
    stationary_fit: object
    residuals: np.ndarray
    selection: object
    mixture_fit: object  # None when L=1 selected
    nonstationary_fit: object  # None when L=1 selected
    stationary_loo: object
    nonstationary_loo: object
    notices: list = field(default_factory=list)

    @property
    def selected_L(self):
        return self.selection.selected_L


def loo_summaries(fit):
    """Leave-one-out predictive mean/sd from the cached factorizations."""
    n = fit.n
    F = fit.F
    H = mean_basis(fit.X)
    eye = np.eye(n)
    mus = np.empty((len(fit.cache), n))
    variances = np.empty_like(mus)
    for d, entry in enumerate(fit.cache):
        beta, L = entry[0], entry[-2]
        Kinv = cho_solve((L, True), eye)
        diag = np.diag(Kinv)
        a = Kinv @ (F - H @ beta)
        mus[d] = F - a / diag
        variances[d] = 1.0 / diag
    mean = mus.mean(axis=0)
    total_var = variances.mean(axis=0) + mus.var(axis=0)
    return mean, np.sqrt(total_var)


def run_pipeline(config, ensemble):
    """Execute the diagnostic-led workflow on a raw ensemble.

    Fits the stationary emulator, classifies its LOO residuals, and (when
    more than one region is supported) fits the mixture-kernel emulator.
    Returns in-memory fits plus LOO-based validation summaries for both.
    """
    if not ensemble.has_response:
        raise StageError("load", "ensemble has no response column")

    try:
        std, X, F = standardize(ensemble.X, ensemble.F, config.input_ranges)
    except Exception as err:
        raise StageError("standardize", err)

    prior = config.gp_prior()
    notices = []

    try:
        st_fit = fit_stationary(
            X, F, prior, config.sampler_config(), max_cached_draws=config.max_cached_draws
        )
    except Exception as err:
        raise StageError("fit_stationary", err)

    try:
        residuals = loo_standardized_residuals(st_fit)
    except Exception as err:
        raise StageError("loo_residuals", err)

    feature_map = FeatureMap(intercept=config.mixture_intercept)
    try:
        selection = select_regions(
            X,
            residuals,
            L_max=config.L_max,
            config=config.sampler_config(seed_offset=1, stage="mixture"),
            feature_map=feature_map,
            band=config.waic_band,
        )
    except Exception as err:
        raise StageError("select_regions", err)

    mixture_fit = None
    ns_fit = None
    ns_loo = None
    if selection.selected_L >= 2:
        mixture_fit = selection.fits[selection.selected_L]
        try:
            ns_fit = fit_nonstationary(
                X,
                F,
                mixture_fit.lambda_hat,
                selection.selected_L,
                prior,
                config.sampler_config(seed_offset=2, stage="nonstationary"),
                max_cached_draws=config.max_cached_draws,
            )
        except Exception as err:
            raise StageError("fit_nonstationary", err)
        ns_mu, ns_sd = loo_summaries(ns_fit)
        ns_loo = score_predictions(F, ns_mu, ns_sd, config.alpha)
    else:
        notices.append("no nonstationarity detected; stationary emulator only")

    st_mu, st_sd = loo_summaries(st_fit)
    st_loo = score_predictions(F, st_mu, st_sd, config.alpha)

    return PipelineResult(
        standardizer=std,
        stationary_fit=st_fit,
        residuals=residuals,
        selection=selection,
        mixture_fit=mixture_fit,
        nonstationary_fit=ns_fit,
        stationary_loo=st_loo,
        nonstationary_loo=ns_loo,
        notices=notices,
    )


class PipelinePredictor:
    """Native-scale predictor wrapping a pipeline result's best emulator."""

    def __init__(self, result, use_nonstationary=True):
        self.result = result
        self.use_nonstationary = use_nonstationary and result.nonstationary_fit is not None

    def predict(self, X_raw):
        std = self.result.standardizer
        Xs = std.transform_inputs(X_raw)
        if self.use_nonstationary:
            summary = predict_nonstationary(self.result.nonstationary_fit, Xs)
        else:
            summary = predict_stationary(self.result.stationary_fit, Xs)
        return std.inverse_response(summary.mean), std.inverse_sd(summary.sd)
