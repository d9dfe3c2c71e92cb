"""Finite mixture model for LOO residuals: mixing functions, WAIC, choice of L.

Standardized residuals are modelled as zero-mean normals whose standard
deviation depends on a latent region label; the label probabilities follow a
softmax (categorical regression) in the inputs.  The label process is
integrated out of the likelihood, draws are taken over the softmax
coefficients and the ordered scales, and the posterior-mean weight function
is frozen for the downstream nonstationary emulator.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .logdists import lognorm_logpdf, norm_logpdf
from .sampler import (
    DrawSet,
    Identity,
    OrderedPositive,
    ParameterTransform,
    SamplerConfig,
    convergence_diagnostics,
    sample_posterior,
    unconstrained_logpdf,
)


class MixtureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMap:
    """g(x) = (x_1, ..., x_p), optionally with a leading intercept."""

    intercept: bool = False

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.intercept:
            return np.column_stack([np.ones(X.shape[0]), X])
        return X

    def dim(self, p):
        return p + 1 if self.intercept else p


@dataclass
class MixturePrior:
    """LogNormal(-1, 1) ordered scales, Normal(0, 5) softmax coefficients."""

    zeta_logmean: float = -1.0
    zeta_logsd: float = 1.0
    alpha_sd: float = 5.0

    def log_density(self, A, zeta):
        total = float(np.sum(lognorm_logpdf(zeta, self.zeta_logmean, self.zeta_logsd)))
        if A is not None and A.size:
            total += float(np.sum(norm_logpdf(A, 0.0, self.alpha_sd)))
        return total


def mixing_weights(A, x, feature_map=FeatureMap()):
    """Softmax mixing weights at one point or row-wise for a matrix of points.

    A has one row of coefficients per region.  Max-subtraction keeps the
    softmax stable for large logits.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    g = feature_map(x)
    if not np.all(np.isfinite(g)):
        raise MixtureError("non-finite features")
    logits = g @ A.T
    logits -= logits.max(axis=1, keepdims=True)
    w = np.exp(logits)
    w /= w.sum(axis=1, keepdims=True)
    return w[0] if np.asarray(x).ndim == 1 else w


def _component_loglik(e, zeta):
    """(n, L) matrix of log N(e_i; 0, zeta_l)."""
    return norm_logpdf(np.asarray(e, dtype=float)[:, None], 0.0, np.asarray(zeta)[None, :])


def mixture_marginal_log_posterior(A, zeta, e, X, prior=None, feature_map=FeatureMap()):
    """Joint log posterior with the latent labels summed out.

    sum_i log sum_l lambda_l(x_i) N(e_i; 0, zeta_l) + log priors.
    """
    prior = prior or MixturePrior()
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if np.any(zeta <= 0):
        raise MixtureError("all scales must be positive")
    e = np.asarray(e, dtype=float)
    L = zeta.size
    if L == 1:
        loglik = float(np.sum(norm_logpdf(e, 0.0, zeta[0])))
        return loglik + prior.log_density(None, zeta)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lam = mixing_weights(A, X, feature_map)
    with np.errstate(divide="ignore"):
        logmix = np.log(lam) + _component_loglik(e, zeta)
    loglik = float(np.sum(logsumexp(logmix, axis=1)))
    return loglik + prior.log_density(A, zeta)


@dataclass
class MixtureFit:
    """Posterior draws of (A, zeta) with the frozen weight function."""

    L: int
    X: np.ndarray
    e: np.ndarray
    drawset: DrawSet
    feature_map: FeatureMap
    converged: bool
    waic: float = None

    def _A_draws(self):
        if self.L == 1:
            return None
        gdim = self.feature_map.dim(self.X.shape[1])
        return self.drawset.draws[:, : self.L * gdim].reshape(-1, self.L, gdim)

    def _zeta_draws(self):
        return self.drawset.draws[:, -self.L :]

    def lambda_hat(self, Xq):
        """Posterior-mean mixing weights at query points (m, L)."""
        Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
        if self.L == 1:
            return np.ones((Xq.shape[0], 1))
        g = self.feature_map(Xq)
        A = self._A_draws()  # (M, L, gdim)
        logits = np.einsum("mg,dlg->dml", g, A)
        logits -= logits.max(axis=2, keepdims=True)
        w = np.exp(logits)
        w /= w.sum(axis=2, keepdims=True)
        return w.mean(axis=0)


def _mixture_transform(L, gdim):
    blocks = []
    if L > 1:
        blocks.append(Identity(L * gdim))
    blocks.append(OrderedPositive(L))
    return ParameterTransform(blocks)


def fit_mixture(X, e, L, prior=None, config=None, feature_map=FeatureMap()):
    """Fit the L-region residual mixture and attach its WAIC."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    e = np.asarray(e, dtype=float)
    n, p = X.shape
    if L < 1:
        raise MixtureError("L must be >= 1")
    if n < 5 * L:
        raise MixtureError(f"need at least {5 * L} residuals for L={L}")
    prior = prior or MixturePrior()
    config = config or SamplerConfig()
    gdim = feature_map.dim(p)
    transform = _mixture_transform(L, gdim)

    def constrained(theta):
        if L == 1:
            return mixture_marginal_log_posterior(None, theta, e, X, prior, feature_map)
        A = theta[: L * gdim].reshape(L, gdim)
        zeta = theta[L * gdim :]
        return mixture_marginal_log_posterior(A, zeta, e, X, prior, feature_map)

    logpdf = unconstrained_logpdf(constrained, transform)
    sd = max(float(np.std(e)), 0.1)
    zeta0 = sd * np.linspace(0.6, 1.4, L)
    theta0 = np.concatenate([np.zeros(L * gdim) if L > 1 else np.empty(0), zeta0])
    cfg = SamplerConfig(
        chains=config.chains,
        warmup_iters=config.warmup_iters,
        keep_iters=config.keep_iters,
        seed=config.seed,
        target_accept=config.target_accept,
        transform=transform,
    )
    drawset = sample_posterior(logpdf, transform.unconstrain(theta0), cfg)
    report = convergence_diagnostics(drawset)
    if not report.converged:
        warnings.warn(f"mixture fit (L={L}) did not converge", RuntimeWarning)
    fit = MixtureFit(
        L=L, X=X, e=e, drawset=drawset, feature_map=feature_map, converged=report.converged
    )
    fit.waic = waic(fit, e, X)
    return fit


def pointwise_log_likelihood(fit, e, X):
    """(draws, n) matrix of log p(e_i | theta_m)."""
    e = np.asarray(e, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    zeta = fit._zeta_draws()  # (M, L)
    comp = norm_logpdf(e[None, :, None], 0.0, zeta[:, None, :])  # (M, n, L)
    if fit.L == 1:
        return comp[:, :, 0]
    A = fit._A_draws()
    g = fit.feature_map(X)
    logits = np.einsum("ng,mlg->mnl", g, A)
    logw = logits - logsumexp(logits, axis=2, keepdims=True)
    return logsumexp(logw + comp, axis=2)


def waic(fit, e, X):
    """WAIC = -2 (lppd - p_waic); lower is better."""
    ll = pointwise_log_likelihood(fit, e, X)  # (M, n)
    M = ll.shape[0]
    lppd = np.sum(logsumexp(ll, axis=0) - np.log(M))
    p_waic = np.sum(np.var(ll, axis=0, ddof=1)) if M > 1 else 0.0
    value = float(-2.0 * (lppd - p_waic))
    if not np.isfinite(value):
        raise MixtureError("WAIC is not finite: zero pointwise likelihood")
    return value


@dataclass
class ModelSelectionReport:
    """WAIC per candidate L with the within-band selection."""

    waic: dict  # L -> waic (only converged candidates)
    fits: dict  # L -> MixtureFit
    selected_L: int
    excluded: list = field(default_factory=list)
    band: float = 2.0

    def table(self):
        lines = ["  L    WAIC    dWAIC(prev - this)"]
        prev = None
        for L in sorted(self.waic):
            d = "" if prev is None else f"{prev - self.waic[L]:10.2f}"
            lines.append(f"  {L}  {self.waic[L]:8.2f}  {d}")
            prev = self.waic[L]
        lines.append(f"  selected L = {self.selected_L} (within {self.band} of minimum)")
        return "\n".join(lines)


def select_regions(X, e, L_max=4, prior=None, config=None, feature_map=FeatureMap(),
                   band=2.0, _extended=False):
    """Fit mixtures for L = 1..L_max and pick the smallest L within `band`
    WAIC units of the minimum; extends the candidate range when the minimum
    sits at L_max."""
    if L_max < 1:
        raise MixtureError("L_max must be >= 1")
    config = config or SamplerConfig()
    fits, waics, excluded = {}, {}, []
    for L in range(1, L_max + 1):
        cfg = SamplerConfig(
            chains=config.chains,
            warmup_iters=config.warmup_iters,
            keep_iters=config.keep_iters,
            seed=config.seed + 97 * L,
            target_accept=config.target_accept,
        )
        try:
            fit = fit_mixture(X, e, L, prior, cfg, feature_map)
        except MixtureError as err:
            excluded.append(L)
            warnings.warn(f"skipping mixture candidate L={L}: {err}", RuntimeWarning)
            continue
        fits[L] = fit
        if fit.converged:
            waics[L] = fit.waic
        else:
            excluded.append(L)
            warnings.warn(f"excluding unconverged mixture candidate L={L}", RuntimeWarning)
    if not waics:
        raise MixtureError("no mixture candidate converged")
    best = min(waics.values())
    best_L = min(L for L, w in waics.items() if w == best)
    n = np.atleast_2d(np.asarray(X)).shape[0]
    if best_L == L_max and not _extended and 5 * (L_max + 1) <= n:
        return select_regions(
            X, e, L_max + 2, prior, config, feature_map, band, _extended=True
        )
    selected = min(L for L, w in waics.items() if w <= best + band)
    return ModelSelectionReport(
        waic=waics, fits=fits, selected_L=selected, excluded=excluded, band=band
    )
