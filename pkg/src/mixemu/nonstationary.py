"""Nonstationary emulator built on a frozen mixture of stationary kernels.

The covariance is sum_l lam_l(x) lam_l(x') k_l(x, x') plus a nugget selected
by the dominant region, with the weight function lam frozen from the
residual-mixture stage.  Region hyperparameters get the same prior forms as
the stationary emulator and are sampled jointly with the mean coefficients.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernels import (
    CorrelationSpec,
    correlation_matrix,
    equality_mask,
    power_exp_corr,
    safe_cholesky,
)
from .logdists import invgamma_logpdf
from .sampler import (
    DrawSet,
    Identity,
    Log,
    ParameterTransform,
    SamplerConfig,
    convergence_diagnostics,
    sample_posterior,
    unconstrained_logpdf,
)
from .stationary import (
    DEFAULT_NUGGET,
    FitError,
    GPPrior,
    PredictiveSummary,
    _augment_beta,
    fit_stationary,
    gaussian_loglik,
    mean_basis,
)


def region_indicator(lam):
    """One-hot vector selecting the dominant mixing weight.

    Ties go to the lowest region index (argmax behaviour).
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 1 or abs(lam.sum() - 1.0) > 1e-8 or np.any(lam < 0):
        raise ValueError("input must lie on the simplex")
    z = np.zeros_like(lam)
    z[np.argmax(lam)] = 1.0
    return z


@dataclass
class RegionKernelSet:
    """Per-region stationary kernels: correlation spec, variance, nugget."""

    corrs: list  # L CorrelationSpec
    variances: np.ndarray  # (L,)
    nuggets: np.ndarray  # (L,)

    @property
    def L(self):
        return len(self.corrs)


def mixture_cov(x, x2, lambda_fn, kernels):
    """Pointwise mixture covariance between two points.

    `lambda_fn` maps a point (or row matrix) to simplex weights.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError("points must share a dimension")
    lam1 = np.asarray(lambda_fn(x), dtype=float).reshape(-1)
    lam2 = np.asarray(lambda_fn(x2), dtype=float).reshape(-1)
    total = 0.0
    for l in range(kernels.L):
        total += (
            lam1[l]
            * lam2[l]
            * kernels.variances[l]
            * power_exp_corr(x, x2, kernels.corrs[l])
        )
    if np.array_equal(x, x2):
        z1 = region_indicator(lam1)
        z2 = region_indicator(lam2)
        total += float(np.sum(z1 * z2 * kernels.nuggets))
    return float(total)


def mixture_kernel_matrix(X, X2, Lam1, Lam2, kernels):
    """Vectorized mixture covariance matrix with nugget on exact row ties."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    K = np.zeros((X.shape[0], X2.shape[0]))
    for l in range(kernels.L):
        K += (
            kernels.variances[l]
            * np.outer(Lam1[:, l], Lam2[:, l])
            * correlation_matrix(X, X2, kernels.corrs[l])
        )
    eq = equality_mask(X, X2)
    if eq.any():
        z1 = np.argmax(Lam1, axis=1)
        z2 = np.argmax(Lam2, axis=1)
        same = z1[:, None] == z2[None, :]
        K += eq * same * kernels.nuggets[z1][:, None]
    return K


def _unpack_ns(theta, q, L, p):
    beta = theta[:q]
    rest = theta[q:].reshape(L, 1 + p)
    sigma2 = rest[:, 0]
    deltas = rest[:, 1:]
    return beta, sigma2, deltas


def nonstationary_log_posterior(theta, X, F, Lam, L, prior, exponents=None,
                                estimate_nuggets=False):
    """Log posterior of (beta, {sigma2_l, delta_l}) given frozen weights."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F = np.asarray(F, dtype=float)
    n, p = X.shape
    q = p + 1
    theta = np.asarray(theta, dtype=float)
    if estimate_nuggets:
        nuggets = theta[-L:]
        theta = theta[:-L]
        if np.any(nuggets <= 0):
            return -np.inf
    else:
        nuggets = np.full(L, prior.nugget)
    beta, sigma2, deltas = _unpack_ns(theta, q, L, p)
    if np.any(sigma2 <= 0) or np.any(deltas <= 0):
        return -np.inf
    kernels = RegionKernelSet(
        corrs=[CorrelationSpec(deltas[l], exponents) for l in range(L)],
        variances=sigma2,
        nuggets=nuggets,
    )
    K = mixture_kernel_matrix(X, X, Lam, Lam, kernels)
    H = mean_basis(X)
    ll = gaussian_loglik(F, H @ beta, K)
    if not np.isfinite(ll):
        return -np.inf
    lp = ll
    for l in range(L):
        lp += prior.log_density(beta if l == 0 else np.empty(0), sigma2[l], deltas[l])
    if estimate_nuggets:
        # InverseGamma(2, 1) scaled to the 1e-2 regime
        lp += float(np.sum(invgamma_logpdf(nuggets * 100.0, 2.0, 1.0)))
    return lp


@dataclass
class FittedNonstationaryGP:
    X: np.ndarray
    F: np.ndarray
    prior: GPPrior
    L: int
    lambda_fn: object  # maps (m, p) -> (m, L)
    drawset: DrawSet
    exponents: np.ndarray
    converged: bool
    max_jitter: float
    estimate_nuggets: bool
    cache: list = field(repr=False, default_factory=list)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def _ns_cache(X, F, draws, L, Lam, prior, exponents, estimate_nuggets, max_draws):
    H = mean_basis(X)
    p = X.shape[1]
    q = p + 1
    m_total = draws.shape[0]
    take = np.linspace(0, m_total - 1, min(max_draws, m_total)).astype(int)
    cache = []
    max_jitter = 0.0
    for idx in take:
        theta = draws[idx]
        if estimate_nuggets:
            nuggets = theta[-L:]
            theta = theta[:-L]
        else:
            nuggets = np.full(L, prior.nugget)
        beta, sigma2, deltas = _unpack_ns(theta, q, L, p)
        kernels = RegionKernelSet(
            corrs=[CorrelationSpec(deltas[l], exponents) for l in range(L)],
            variances=sigma2,
            nuggets=nuggets,
        )
        K = mixture_kernel_matrix(X, X, Lam, Lam, kernels)
        Lchol, jitter = safe_cholesky(K)
        max_jitter = max(max_jitter, jitter)
        alpha = cho_solve((Lchol, True), F - H @ beta)
        cache.append((beta, kernels, Lchol, alpha))
    return cache, max_jitter


def fit_nonstationary(X, F, lambda_fn, L, prior=None, config=None, exponents=None,
                      estimate_nuggets=False, max_cached_draws=400):
    """Joint posterior sampling of the region hyperparameters.

    `lambda_fn` must be the frozen weight function from the mixture stage.
    L=1 degenerates to the stationary emulator and is delegated there.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F = np.asarray(F, dtype=float)
    prior = prior or GPPrior()
    config = config or SamplerConfig()
    if L < 1:
        raise FitError("L must be >= 1")
    if L == 1:
        warnings.warn("L=1 requested; falling back to the stationary emulator", RuntimeWarning)
        return fit_stationary(X, F, prior, config, exponents, max_cached_draws)

    n, p = X.shape
    q = p + 1
    if n <= q:
        raise FitError(f"need n > {q} runs")
    Lam = np.asarray(lambda_fn(X), dtype=float)
    if Lam.shape != (n, L):
        raise FitError(f"lambda_fn returned shape {Lam.shape}, expected {(n, L)}")

    H = mean_basis(X)
    beta0, *_ = np.linalg.lstsq(H, F, rcond=None)
    sigma0 = max(float(np.var(F - H @ beta0)), 1e-2)
    per_region = np.concatenate([[sigma0], np.ones(p)])
    psi0 = np.concatenate([per_region] * L)
    blocks = [Log(1 + p)] * L
    if estimate_nuggets:
        psi0 = np.concatenate([psi0, np.full(L, prior.nugget)])
        blocks.append(Log(L))
    transform = ParameterTransform(blocks)

    # beta is collapsed out of the sampled density and redrawn exactly per
    # kept draw, as in the stationary fit.
    s2 = prior.beta_sd**2
    HHt = H @ H.T

    # Everything that does not depend on psi is precomputed once: the
    # |dx|^phi displacement tensor, per-region weight outer products, and
    # the per-region nugget masks on bitwise-equal rows.
    phi = np.full(p, 2.0) if exponents is None else np.broadcast_to(
        np.asarray(exponents, dtype=float), (p,)
    )
    D = np.abs(X[:, None, :] - X[None, :, :]) ** phi  # (n, n, p)
    W = [np.outer(Lam[:, l], Lam[:, l]) for l in range(L)]
    eq = equality_mask(X, X)
    zidx = np.argmax(Lam, axis=1)
    N = [(eq & (zidx[:, None] == l) & (zidx[None, :] == l)).astype(float) for l in range(L)]

    def kernels_of_psi(psi):
        if estimate_nuggets:
            nuggets = psi[-L:]
            psi = psi[:-L]
        else:
            nuggets = np.full(L, prior.nugget)
        rest = psi.reshape(L, 1 + p)
        return RegionKernelSet(
            corrs=[CorrelationSpec(rest[l, 1:], exponents) for l in range(L)],
            variances=rest[:, 0],
            nuggets=nuggets,
        )

    def kernel_of_psi(psi):
        kernels = kernels_of_psi(psi)
        K = np.zeros((n, n))
        for l in range(L):
            R = np.exp(-np.tensordot(D, kernels.corrs[l].lengthscales ** -phi, axes=([2], [0])))
            K += kernels.variances[l] * W[l] * R
            K += kernels.nuggets[l] * N[l]
        return K

    def collapsed_lp(psi):
        if np.any(psi <= 0):
            return -np.inf
        ll = gaussian_loglik(F, 0.0, kernel_of_psi(psi) + s2 * HHt)
        if not np.isfinite(ll):
            return -np.inf
        kernels = kernels_of_psi(psi)
        lp = ll
        for l in range(L):
            lp += prior.log_density_cov(kernels.variances[l], kernels.corrs[l].lengthscales)
        if estimate_nuggets:
            lp += float(np.sum(invgamma_logpdf(kernels.nuggets * 100.0, 2.0, 1.0)))
        return lp

    logpdf = unconstrained_logpdf(collapsed_lp, transform)
    cfg = SamplerConfig(
        chains=config.chains,
        warmup_iters=config.warmup_iters,
        keep_iters=config.keep_iters,
        seed=config.seed,
        target_accept=config.target_accept,
        transform=transform,
    )
    psi_draws = sample_posterior(logpdf, transform.unconstrain(psi0), cfg)
    drawset = _augment_beta(psi_draws, kernel_of_psi, H, F, prior.beta_sd, config.seed)
    report = convergence_diagnostics(drawset)
    if not report.converged:
        warnings.warn("nonstationary fit did not pass convergence diagnostics", RuntimeWarning)
    cache, max_jitter = _ns_cache(
        X, F, drawset.draws, L, Lam, prior, exponents, estimate_nuggets, max_cached_draws
    )
    return FittedNonstationaryGP(
        X=X,
        F=F,
        prior=prior,
        L=L,
        lambda_fn=lambda_fn,
        drawset=drawset,
        exponents=None if exponents is None else np.asarray(exponents, dtype=float),
        converged=report.converged,
        max_jitter=max_jitter,
        estimate_nuggets=estimate_nuggets,
        cache=cache,
    )


def predict_nonstationary(fit, Xnew, keep_draws=False):
    """Posterior-predictive mean/sd under the mixture kernel."""
    Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
    Hnew = mean_basis(Xnew)
    Lam_new = np.asarray(fit.lambda_fn(Xnew), dtype=float)
    Lam = np.asarray(fit.lambda_fn(fit.X), dtype=float)
    z_new = np.argmax(Lam_new, axis=1)
    means = np.empty((len(fit.cache), Xnew.shape[0]))
    variances = np.empty_like(means)
    for d, (beta, kernels, Lchol, alpha) in enumerate(fit.cache):
        C = mixture_kernel_matrix(Xnew, fit.X, Lam_new, Lam, kernels)
        means[d] = Hnew @ beta + C @ alpha
        v = solve_triangular(Lchol, C.T, lower=True)
        kdiag = np.sum(Lam_new**2 * kernels.variances[None, :], axis=1)
        kdiag = kdiag + kernels.nuggets[z_new]
        var = kdiag - np.sum(v * v, axis=0)
        if np.any(var < -1e-8):
            raise FitError(f"negative predictive variance {var.min():.3e}")
        variances[d] = np.maximum(var, 0.0)
    mean = means.mean(axis=0)
    total_var = variances.mean(axis=0) + means.var(axis=0)
    return PredictiveSummary(
        mean=mean,
        sd=np.sqrt(total_var),
        draw_means=means if keep_draws else None,
        draw_vars=variances if keep_draws else None,
    )
