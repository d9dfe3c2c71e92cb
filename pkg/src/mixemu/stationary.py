"""Stationary GP emulator: priors, posterior sampling, prediction, fast LOO.

The "out of the box" emulator: linear mean h(x) = (1, x_1, ..., x_p), power
exponential correlation, fixed small nugget, full-Bayes hyperparameter
inference.  Leave-one-out standardized residuals use the closed-form
identities, so no refits are needed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .kernels import (
    CorrelationSpec,
    FactorizationError,
    StationaryKernelSpec,
    correlation_matrix,
    equality_mask,
    safe_cholesky,
)
from .logdists import gamma_logpdf, invgamma_logpdf, norm_logpdf
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

DEFAULT_NUGGET = 1e-4


class FitError(RuntimeError):
    pass


def mean_basis(X):
    """Linear mean basis h(x) = (1, x_1, ..., x_p) evaluated row-wise."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.column_stack([np.ones(X.shape[0]), X])


@dataclass
class GPPrior:
    """Hyperpriors for the (non)stationary emulators.

    delta_shape / delta_rate may be scalars or per-dimension vectors so a
    smoother prior (e.g. Gamma(42, 9)) can be assigned to selected inputs.
    """

    beta_sd: float = 10.0
    delta_shape: np.ndarray = 4.0
    delta_rate: np.ndarray = 4.0
    sigma2_shape: float = 2.0
    sigma2_scale: float = 1.0
    nugget: float = DEFAULT_NUGGET

    def delta_params(self, p):
        shape = np.broadcast_to(np.asarray(self.delta_shape, dtype=float), (p,))
        rate = np.broadcast_to(np.asarray(self.delta_rate, dtype=float), (p,))
        return shape, rate

    def log_density_cov(self, sigma2, delta):
        p = np.asarray(delta).size
        shape, rate = self.delta_params(p)
        return float(
            invgamma_logpdf(sigma2, self.sigma2_shape, self.sigma2_scale)
        ) + float(np.sum(gamma_logpdf(delta, shape, rate)))

    def log_density(self, beta, sigma2, delta):
        return float(
            np.sum(norm_logpdf(beta, 0.0, self.beta_sd))
        ) + self.log_density_cov(sigma2, delta)


def _unpack(theta, p):
    q = theta.size - 1 - p
    return theta[:q], theta[q], theta[q + 1 :]


def _augment_beta(psi_draws, kernel_of_psi, H, F, beta_sd, seed):
    """Append exact conditional draws of beta to sampled covariance draws.

    Given psi -> K, beta | psi, F is Normal with precision
    H^T K^{-1} H + I / beta_sd^2; the returned DrawSet carries
    (beta, psi) per draw in that order.
    """
    chains, keep, _ = psi_draws.by_chain.shape
    q = H.shape[1]
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0x7FFFFFFF, 0xBE7A]))
    full = np.empty((chains, keep, q + psi_draws.by_chain.shape[2]))
    prec_prior = np.eye(q) / beta_sd**2
    for c in range(chains):
        for m in range(keep):
            psi = psi_draws.by_chain[c, m]
            K = kernel_of_psi(psi)
            L, _ = safe_cholesky(K)
            KinvH = cho_solve((L, True), H)
            A = H.T @ KinvH + prec_prior
            La = np.linalg.cholesky(A)
            mu = cho_solve((La, True), KinvH.T @ F)
            z = rng.standard_normal(q)
            beta = mu + solve_triangular(La.T, z, lower=False)
            full[c, m, :q] = beta
            full[c, m, q:] = psi
    return DrawSet(by_chain=full, accept_rate=psi_draws.accept_rate)


def gaussian_loglik(F, mean, K):
    """log N(F; mean, K) via safeguarded Cholesky; -inf if unfactorizable."""
    try:
        L, _ = safe_cholesky(K)
    except FactorizationError:
        return -np.inf
    resid = F - mean
    alpha = solve_triangular(L, resid, lower=True)
    n = F.size
    return float(
        -0.5 * alpha @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * np.log(2 * np.pi)
    )


def stationary_log_posterior(theta, X, F, prior, exponents=None):
    """Log posterior (up to a constant) of theta = (beta, sigma2, delta)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F = np.asarray(F, dtype=float)
    p = X.shape[1]
    theta = np.asarray(theta, dtype=float)
    beta, sigma2, delta = _unpack(theta, p)
    if sigma2 <= 0 or np.any(delta <= 0):
        return -np.inf
    H = mean_basis(X)
    if H.shape[1] > X.shape[0]:
        raise FitError("need more runs than mean-basis coefficients")
    corr = CorrelationSpec(delta, exponents)
    K = sigma2 * correlation_matrix(X, X, corr)
    K = K + prior.nugget * equality_mask(X, X)
    ll = gaussian_loglik(F, H @ beta, K)
    if not np.isfinite(ll):
        return -np.inf
    return ll + prior.log_density(beta, sigma2, delta)


@dataclass
class PredictiveSummary:
    """Posterior-predictive summary averaged over hyperparameter draws."""

    mean: np.ndarray
    sd: np.ndarray
    draw_means: np.ndarray = None  # (draws, points) when retained
    draw_vars: np.ndarray = None


@dataclass
class FittedStationaryGP:
    X: np.ndarray
    F: np.ndarray
    prior: GPPrior
    drawset: DrawSet
    exponents: np.ndarray
    converged: bool
    max_jitter: float
    # per cached draw: (beta, sigma2, delta, chol, alpha)
    cache: list = field(repr=False, default_factory=list)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


def _prediction_cache(X, F, draws, exponents, nugget, max_draws):
    """Cholesky factor and weight vector for a thinned subset of draws."""
    H = mean_basis(X)
    p = X.shape[1]
    m_total = draws.shape[0]
    take = np.linspace(0, m_total - 1, min(max_draws, m_total)).astype(int)
    eq = equality_mask(X, X)
    cache = []
    max_jitter = 0.0
    for idx in take:
        beta, sigma2, delta = _unpack(draws[idx], p)
        corr = CorrelationSpec(delta, exponents)
        K = sigma2 * correlation_matrix(X, X, corr) + nugget * eq
        L, jitter = safe_cholesky(K)
        max_jitter = max(max_jitter, jitter)
        alpha = cho_solve((L, True), F - H @ beta)
        cache.append((beta, float(sigma2), delta, L, alpha))
    return cache, max_jitter


def fit_stationary(X, F, prior=None, config=None, exponents=None, max_cached_draws=400):
    """Sample the hyperparameter posterior and cache per-draw factorizations.

    The fit is returned even when diagnostics flag parameters; `converged`
    records the outcome.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    F = np.asarray(F, dtype=float)
    prior = prior or GPPrior()
    config = config or SamplerConfig()
    n, p = X.shape
    q = p + 1
    if n <= q:
        raise FitError(f"need n > {q} runs for a {p}-input linear mean")

    H = mean_basis(X)
    beta0, *_ = np.linalg.lstsq(H, F, rcond=None)
    resid = F - H @ beta0
    sigma0 = max(float(np.var(resid)), 1e-2)

    # Collapsed sampling: the Normal beta prior is conjugate, so beta is
    # integrated out of the sampled density and redrawn exactly per kept
    # draw.  This removes the slow-mixing beta/GP ridge from the walk.
    s2 = prior.beta_sd**2
    HHt = H @ H.T
    eq = equality_mask(X, X)

    def collapsed_lp(psi):
        sigma2, delta = psi[0], psi[1:]
        if sigma2 <= 0 or np.any(delta <= 0):
            return -np.inf
        corr = CorrelationSpec(delta, exponents)
        K = sigma2 * correlation_matrix(X, X, corr) + prior.nugget * eq + s2 * HHt
        ll = gaussian_loglik(F, 0.0, K)
        if not np.isfinite(ll):
            return -np.inf
        return ll + prior.log_density_cov(sigma2, delta)

    transform = ParameterTransform([Log(1 + p)])
    psi0 = np.concatenate([[sigma0], np.ones(p)])
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
    def kernel_of_psi(psi):
        corr = CorrelationSpec(psi[1:], exponents)
        return psi[0] * correlation_matrix(X, X, corr) + prior.nugget * eq

    drawset = _augment_beta(psi_draws, kernel_of_psi, H, F, prior.beta_sd, config.seed)
    report = convergence_diagnostics(drawset)
    if not report.converged:
        warnings.warn("stationary fit did not pass convergence diagnostics", RuntimeWarning)

    cache, max_jitter = _prediction_cache(
        X, F, drawset.draws, exponents, prior.nugget, max_cached_draws
    )
    if max_jitter > 0:
        warnings.warn(f"kernel factorization needed jitter {max_jitter:g}", RuntimeWarning)
    return FittedStationaryGP(
        X=X,
        F=F,
        prior=prior,
        drawset=drawset,
        exponents=None if exponents is None else np.asarray(exponents, dtype=float),
        converged=report.converged,
        max_jitter=max_jitter,
        cache=cache,
    )


def predict_stationary(fit, Xnew, keep_draws=False):
    """Posterior-predictive mean/sd at new points.

    Per draw the conditional mean/variance come from the standard update
    formulas; the summary averages means and applies the law of total
    variance across draws.
    """
    Xnew = np.atleast_2d(np.asarray(Xnew, dtype=float))
    Hnew = mean_basis(Xnew)
    eq = equality_mask(Xnew, fit.X)
    any_eq = bool(eq.any())
    means = np.empty((len(fit.cache), Xnew.shape[0]))
    variances = np.empty_like(means)
    for d, (beta, sigma2, delta, L, alpha) in enumerate(fit.cache):
        corr = CorrelationSpec(delta, fit.exponents)
        C = sigma2 * correlation_matrix(Xnew, fit.X, corr)
        if any_eq:
            C = C + fit.prior.nugget * eq
        means[d] = Hnew @ beta + C @ alpha
        v = solve_triangular(L, C.T, lower=True)
        var = sigma2 + fit.prior.nugget - np.sum(v * v, axis=0)
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


def loo_standardized_residuals(fit, mode="average"):
    """Closed-form leave-one-out standardized residuals.

    With fixed hyperparameters, mu_{-i} = F_i - [K^{-1}(F - H beta)]_i /
    [K^{-1}]_{ii} and sd^2_{-i} = 1 / [K^{-1}]_{ii}, so
    e_i = [K^{-1}(F - H beta)]_i / sqrt([K^{-1}]_{ii}).

    mode "average" averages e over the cached draws; "posterior_mean"
    evaluates once at the posterior-mean hyperparameters.
    """
    if mode not in ("average", "posterior_mean"):
        raise ValueError("mode must be 'average' or 'posterior_mean'")
    H = mean_basis(fit.X)
    eqI = np.eye(fit.n)

    def residuals_for(beta, sigma2, delta, L=None):
        corr = CorrelationSpec(delta, fit.exponents)
        if L is None:
            K = sigma2 * correlation_matrix(fit.X, fit.X, corr)
            K = K + fit.prior.nugget * equality_mask(fit.X, fit.X)
            L, _ = safe_cholesky(K)
        Kinv = cho_solve((L, True), eqI)
        diag = np.diag(Kinv)
        if np.any(diag <= 0):
            raise FitError("nonpositive diagonal in K^{-1}; LOO undefined")
        a = Kinv @ (fit.F - H @ beta)
        return a / np.sqrt(diag)

    if mode == "posterior_mean":
        theta = fit.drawset.draws.mean(axis=0)
        beta, sigma2, delta = _unpack(theta, fit.p)
        return residuals_for(beta, sigma2, delta)

    e = np.zeros(fit.n)
    for beta, sigma2, delta, L, _alpha in fit.cache:
        e += residuals_for(beta, sigma2, delta, L)
    return e / len(fit.cache)
