"""Independent brute-force oracles used to validate fast closed-form paths.

Everything here is written with dense numpy/scipy linear algebra and direct
enumeration, deliberately avoiding the library's optimized code paths.
"""

import itertools

import numpy as np
from scipy import stats


def dense_kernel(X, X2, sigma2, delta, nugget, exponents=None):
    """Dense power-exponential kernel built point by point."""
    X = np.atleast_2d(X)
    X2 = np.atleast_2d(X2)
    p = X.shape[1]
    phi = np.full(p, 2.0) if exponents is None else np.asarray(exponents, dtype=float)
    K = np.empty((X.shape[0], X2.shape[0]))
    for i in range(X.shape[0]):
        for j in range(X2.shape[0]):
            d = np.abs(X[i] - X2[j])
            K[i, j] = sigma2 * np.exp(-np.sum((d / np.asarray(delta)) ** phi))
            if np.array_equal(X[i], X2[j]):
                K[i, j] += nugget
    return K


def gp_log_posterior(theta, X, F, prior, exponents=None):
    """Log posterior of (beta, sigma2, delta) via scipy densities."""
    X = np.atleast_2d(X)
    n, p = X.shape
    beta = theta[: p + 1]
    sigma2 = theta[p + 1]
    delta = theta[p + 2 :]
    H = np.column_stack([np.ones(n), X])
    K = dense_kernel(X, X, sigma2, delta, prior.nugget, exponents)
    ll = stats.multivariate_normal.logpdf(F, mean=H @ beta, cov=K)
    shape, rate = prior.delta_params(p)
    lp = (
        np.sum(stats.norm.logpdf(beta, 0.0, prior.beta_sd))
        + stats.invgamma.logpdf(sigma2, prior.sigma2_shape, scale=prior.sigma2_scale)
        + np.sum(stats.gamma.logpdf(delta, shape, scale=1.0 / rate))
    )
    return float(ll + lp)


def gp_predict(Xnew, X, F, beta, sigma2, delta, nugget, exponents=None):
    """Dense conditional mean/variance from the textbook update formulas."""
    Xnew = np.atleast_2d(Xnew)
    X = np.atleast_2d(X)
    H = np.column_stack([np.ones(X.shape[0]), X])
    Hnew = np.column_stack([np.ones(Xnew.shape[0]), Xnew])
    K = dense_kernel(X, X, sigma2, delta, nugget, exponents)
    C = dense_kernel(Xnew, X, sigma2, delta, nugget, exponents)
    Kinv = np.linalg.inv(K)
    mean = Hnew @ beta + C @ Kinv @ (F - H @ beta)
    var = sigma2 + nugget - np.einsum("ij,jk,ik->i", C, Kinv, C)
    return mean, var


def loo_refit(X, F, beta, sigma2, delta, nugget, exponents=None):
    """Leave-one-out standardized residuals by literally refitting without i."""
    X = np.atleast_2d(X)
    n = X.shape[0]
    e = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        mean, var = gp_predict(
            X[i : i + 1], X[keep], F[keep], beta, sigma2, delta, nugget, exponents
        )
        e[i] = (F[i] - mean[0]) / np.sqrt(var[0])
    return e


def mixture_loglik_enumeration(e, Lam, zetas):
    """Mixture marginal log likelihood by summing over all L^n assignments.

    p(e) = sum_s prod_i lambda_{s_i}(x_i) * N(e_i; 0, zeta_{s_i}^2)
    """
    n = e.size
    L = Lam.shape[1]
    total = 0.0
    for s in itertools.product(range(L), repeat=n):
        term = 1.0
        for i, si in enumerate(s):
            term *= Lam[i, si] * stats.norm.pdf(e[i], 0.0, zetas[si])
        total += term
    return float(np.log(total))


def waic_by_hand(log_lik):
    """WAIC from a (draws, points) pointwise log-likelihood matrix."""
    lppd = np.sum(np.log(np.mean(np.exp(log_lik), axis=0)))
    p_waic = np.sum(np.var(log_lik, axis=0, ddof=1)) if log_lik.shape[0] > 1 else 0.0
    return float(-2.0 * (lppd - p_waic))
