"""Adaptive random-walk MCMC with rank-normalized convergence diagnostics.

The engine samples on an unconstrained scale; parameter transforms (log for
positives, cumulative-exponential for ordered vectors) map draws back to the
constrained space and contribute their log-Jacobians.  Proposal covariance
and step scale adapt with a diminishing rate throughout the run, which
preserves ergodicity while letting chains recover from a poor warm-up
configuration.  Identical config + seed gives bitwise-identical output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri


class SamplerError(RuntimeError):
    pass


class InitializationError(SamplerError):
    """Log density could not be made finite at or near the start point."""


class DiagnosticError(SamplerError):
    pass


# ---------------------------------------------------------------------------
# parameter transforms (unconstrained -> constrained)
# ---------------------------------------------------------------------------


class Identity:
    """Unbounded block of size n."""

    def __init__(self, n):
        self.n = n

    def constrain(self, u):
        return u

    def unconstrain(self, x):
        return np.asarray(x, dtype=float)

    def log_jacobian(self, u):
        return 0.0


class Log:
    """Positive block of size n via exp."""

    def __init__(self, n):
        self.n = n

    def constrain(self, u):
        return np.exp(u)

    def unconstrain(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise ValueError("log transform requires positive values")
        return np.log(x)

    def log_jacobian(self, u):
        return float(np.sum(u))


class OrderedPositive:
    """Ordered positive vector: x1 = exp(u1), x_k = x_{k-1} + exp(u_k)."""

    def __init__(self, n):
        self.n = n

    def constrain(self, u):
        return np.cumsum(np.exp(u))

    def unconstrain(self, x):
        x = np.asarray(x, dtype=float)
        gaps = np.diff(x, prepend=0.0)
        if np.any(gaps <= 0):
            raise ValueError("values must be strictly increasing and positive")
        return np.log(gaps)

    def log_jacobian(self, u):
        return float(np.sum(u))


class ParameterTransform:
    """Concatenation of per-block transforms covering the whole vector."""

    def __init__(self, blocks):
        self.blocks = list(blocks)
        self.dim = sum(b.n for b in self.blocks)

    def constrain(self, u):
        u = np.asarray(u, dtype=float)
        out = np.empty_like(u)
        i = 0
        for b in self.blocks:
            out[i : i + b.n] = b.constrain(u[i : i + b.n])
            i += b.n
        return out

    def unconstrain(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        i = 0
        for b in self.blocks:
            out[i : i + b.n] = b.unconstrain(x[i : i + b.n])
            i += b.n
        return out

    def log_jacobian(self, u):
        u = np.asarray(u, dtype=float)
        total = 0.0
        i = 0
        for b in self.blocks:
            total += b.log_jacobian(u[i : i + b.n])
            i += b.n
        return total


def unconstrained_logpdf(constrained_logpdf, transform):
    """Wrap a constrained-space log density for sampling on R^d."""

    def logpdf(u):
        return constrained_logpdf(transform.constrain(u)) + transform.log_jacobian(u)

    return logpdf


# ---------------------------------------------------------------------------
# configuration / results
# ---------------------------------------------------------------------------


@dataclass
class SamplerConfig:
    chains: int = 4
    warmup_iters: int = 1000
    keep_iters: int = 1000
    seed: int = 0
    target_accept: float = 0.3
    transform: ParameterTransform = None
    init_jitter_retries: int = 30
    optimize_init: bool = True

    def __post_init__(self):
        if self.chains < 2:
            raise ValueError("at least 2 chains are required")
        if self.keep_iters < 1 or self.warmup_iters < 0:
            raise ValueError("iteration counts must be positive")
        if not (0 < self.target_accept < 1):
            raise ValueError("target_accept must lie in (0, 1)")


@dataclass
class DrawSet:
    """Posterior draws in constrained space, organized by chain."""

    by_chain: np.ndarray  # (chains, keep_iters, d)
    rhat: np.ndarray = None
    ess: np.ndarray = None
    accept_rate: np.ndarray = None

    @property
    def draws(self):
        c, m, d = self.by_chain.shape
        return self.by_chain.reshape(c * m, d)

    @property
    def chain_labels(self):
        c, m, _ = self.by_chain.shape
        return np.repeat(np.arange(c), m)

    @property
    def n_total(self):
        return self.by_chain.shape[0] * self.by_chain.shape[1]


@dataclass
class DiagnosticsReport:
    rhat: np.ndarray
    ess: np.ndarray
    flagged: np.ndarray  # bool per parameter

    @property
    def converged(self):
        return not bool(np.any(self.flagged))


# ---------------------------------------------------------------------------
# adaptive random-walk Metropolis
# ---------------------------------------------------------------------------


def _find_start(log_density, init, rng, retries):
    u = np.asarray(init, dtype=float).copy()
    lp = log_density(u)
    if np.isfinite(lp):
        return u, lp
    for attempt in range(retries):
        scale = 0.1 * (1.5 ** (attempt // 5))
        cand = init + scale * rng.standard_normal(u.size)
        lp = log_density(cand)
        if np.isfinite(lp):
            return cand, lp
    raise InitializationError(
        "log density is not finite at the start point or any jittered retry"
    )


def _run_chain(log_density, init, config, rng):
    d = np.asarray(init).size
    u, lp = _find_start(log_density, init, rng, config.init_jitter_retries)

    log_scale = math.log(2.38 / math.sqrt(d))
    chol = np.eye(d)
    mean = u.copy()
    cov = np.eye(d)
    count = 0

    warm = config.warmup_iters
    keep = config.keep_iters
    out = np.empty((keep, d))
    accepted_keep = 0

    for t in range(warm + keep):
        step = math.exp(log_scale)
        prop = u + step * (chol @ rng.standard_normal(d))
        lp_prop = log_density(prop)
        log_u = math.log(rng.random())
        accept_prob = min(1.0, math.exp(min(0.0, lp_prop - lp))) if np.isfinite(lp_prop) else 0.0
        if np.isfinite(lp_prop) and log_u < lp_prop - lp:
            u, lp = prop, lp_prop
            accepted = True
        else:
            accepted = False

        # Robbins-Monro on the step scale, Haario-style covariance.  The
        # adaptation rate decays toward zero, so it can safely continue
        # past warm-up (diminishing adaptation); this lets a chain whose
        # warm-up proposal settled badly keep improving.
        count += 1
        eta = min(0.9, 5.0 / (count + 10) ** 0.6)
        log_scale += eta * (accept_prob - config.target_accept)
        diff = u - mean
        mean = mean + diff / count
        cov = cov + (np.outer(u - mean, diff) - cov) / count
        if count >= max(50, 2 * d) and count % 25 == 0:
            try:
                chol = np.linalg.cholesky(cov + 1e-10 * np.eye(d))
            except np.linalg.LinAlgError:
                pass
        if t >= warm:
            out[t - warm] = u
            accepted_keep += accepted

    return out, accepted_keep / keep


def _mode_seek(log_density, init):
    """Deterministic coarse mode search to shorten burn-in transients.

    A derivative-free local optimization from the supplied start; failures
    fall back to the original point.
    """
    from scipy.optimize import minimize

    def objective(u):
        lp = log_density(u)
        return -lp if np.isfinite(lp) else 1e12

    try:
        res = minimize(
            objective,
            np.asarray(init, dtype=float),
            method="Nelder-Mead",
            options={"maxiter": 200 * init.size, "xatol": 1e-3, "fatol": 1e-3},
        )
    except Exception:
        return init
    if np.isfinite(res.fun) and res.fun < 1e12:
        return np.asarray(res.x, dtype=float)
    return init


def sample_posterior(log_density, init, config, gradient=None):
    """Draw from a posterior given its unconstrained-space log density.

    Parameters
    ----------
    log_density : callable
        Maps an unconstrained d-vector to a log density (Jacobian terms
        included; see :func:`unconstrained_logpdf`).
    init : array_like, shape (d,)
        Unconstrained starting point, shared by all chains up to jitter.
    config : SamplerConfig
    gradient : callable, optional
        Accepted for interface compatibility; the baseline kernel is
        gradient-free and ignores it.

    Returns
    -------
    DrawSet
        Constrained-space draws with R-hat/ESS attached.
    """
    init = np.atleast_1d(np.asarray(init, dtype=float))
    transform = config.transform or ParameterTransform([Identity(init.size)])
    if transform.dim != init.size:
        raise ValueError("transform dimension does not match init")

    if config.optimize_init:
        init = _mode_seek(log_density, init)

    root = np.random.SeedSequence(config.seed)
    seeds = root.spawn(config.chains)
    chains = []
    accept = []
    for c in range(config.chains):
        rng = np.random.default_rng(seeds[c])
        start = init if c == 0 else init + 0.1 * rng.standard_normal(init.size)
        raw, acc = _run_chain(log_density, start, config, rng)
        chains.append(raw)
        accept.append(acc)

    by_chain_u = np.stack(chains)
    by_chain = np.empty_like(by_chain_u)
    for c in range(config.chains):
        for m in range(config.keep_iters):
            by_chain[c, m] = transform.constrain(by_chain_u[c, m])

    ds = DrawSet(by_chain=by_chain, accept_rate=np.asarray(accept))
    report = convergence_diagnostics(ds)
    ds.rhat = report.rhat
    ds.ess = report.ess
    return ds


# ---------------------------------------------------------------------------
# diagnostics (rank-normalized split R-hat and ESS)
# ---------------------------------------------------------------------------


def _split_chains(x):
    c, m = x.shape
    half = m // 2
    return np.concatenate([x[:, :half], x[:, m - half :]], axis=0)


def _rank_normalize(x):
    shape = x.shape
    flat = x.reshape(-1)
    order = np.argsort(flat, kind="stable")
    ranks = np.empty_like(order, dtype=float)
    ranks[order] = np.arange(1, flat.size + 1)
    # average ranks over exact ties
    uniq, inv = np.unique(flat, return_inverse=True)
    if uniq.size < flat.size:
        sums = np.bincount(inv, weights=ranks)
        counts = np.bincount(inv)
        ranks = (sums / counts)[inv]
    z = ndtri((ranks - 0.375) / (flat.size + 0.25))
    return z.reshape(shape)


def _rhat_1d(x):
    z = _rank_normalize(_split_chains(x))
    c, m = z.shape
    chain_means = z.mean(axis=1)
    b = m * np.var(chain_means, ddof=1)
    w = np.mean(np.var(z, axis=1, ddof=1))
    if w <= 0:
        return np.inf if b > 0 else 1.0
    var_plus = (m - 1) / m * w + b / m
    return math.sqrt(var_plus / w)


def _autocovariance(x):
    n = x.size
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conjugate(f), nfft)[:n].real
    return acov / n


def _ess_1d(x):
    z = _rank_normalize(_split_chains(x))
    c, m = z.shape
    if m < 4:
        return float("nan")
    acovs = np.stack([_autocovariance(z[i]) for i in range(c)])
    chain_var = np.var(z, axis=1, ddof=1)
    w = chain_var.mean()
    var_plus = w * (m - 1) / m + np.var(z.mean(axis=1), ddof=1)
    if var_plus <= 0:
        return float("nan")
    rho = 1.0 - (w - acovs.mean(axis=0)) / var_plus
    # Geyer initial monotone positive sequence over lag pairs
    pairs = []
    prev_pair = float("inf")
    t = 0
    while t + 1 < m:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev_pair)
        pairs.append(pair)
        prev_pair = pair
        t += 2
    tau = max(-1.0 + 2.0 * sum(pairs), 1.0)
    return c * m / tau


def convergence_diagnostics(drawset):
    """Split R-hat and effective sample size per parameter.

    Flags parameters with R-hat > 1.05 or ESS < 100.
    """
    by_chain = drawset.by_chain
    if by_chain.shape[0] < 2:
        raise DiagnosticError("convergence diagnostics require at least 2 chains")
    d = by_chain.shape[2]
    rhat = np.empty(d)
    ess = np.empty(d)
    for j in range(d):
        x = by_chain[:, :, j]
        if np.allclose(x, x.reshape(-1)[0]):
            # degenerate constant parameter: no information, do not flag
            rhat[j] = 1.0
            ess[j] = float(x.size)
            continue
        rhat[j] = _rhat_1d(x)
        ess[j] = _ess_1d(x)
    flagged = (rhat > 1.05) | (ess < 100) | ~np.isfinite(rhat) | ~np.isfinite(ess)
    return DiagnosticsReport(rhat=rhat, ess=ess, flagged=flagged)
