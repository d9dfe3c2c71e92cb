"""Latin hypercube designs (maximin, k-extended) and ensemble standardization.

Designs live on [-1, 1]^p.  Use :class:`Standardizer` to map between the
simulator's native input ranges / response scale and the emulator's
standardized scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist


class DesignError(ValueError):
    pass


@dataclass
class Design:
    """Points on [-1,1]^p with per-point sub-design (fold) labels."""

    points: np.ndarray  # (n, p)
    fold_labels: np.ndarray  # (n,) ints
    seed: int
    criterion: float  # minimum pairwise distance achieved

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def p(self):
        return self.points.shape[1]

    def folds(self):
        return [np.flatnonzero(self.fold_labels == k) for k in np.unique(self.fold_labels)]


@dataclass
class Standardizer:
    """Affine maps: inputs to [-1,1]^p, response to mean 0 / sd 1."""

    input_lower: np.ndarray
    input_upper: np.ndarray
    response_mean: float
    response_sd: float

    @classmethod
    def fit(cls, X_raw, F_raw, input_ranges=None):
        X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
        F_raw = np.asarray(F_raw, dtype=float)
        if input_ranges is None:
            lower = X_raw.min(axis=0)
            upper = X_raw.max(axis=0)
        else:
            ranges = np.asarray(input_ranges, dtype=float)
            lower, upper = ranges[:, 0], ranges[:, 1]
        if np.any(upper <= lower):
            raise DesignError("input ranges must have upper > lower")
        sd = float(np.std(F_raw, ddof=1)) if F_raw.size > 1 else 0.0
        if not sd > 0:
            raise DesignError("response is constant; emulation is degenerate")
        return cls(lower, upper, float(np.mean(F_raw)), sd)

    def transform_inputs(self, X_raw):
        X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
        return 2.0 * (X_raw - self.input_lower) / (self.input_upper - self.input_lower) - 1.0

    def inverse_inputs(self, X_std):
        X_std = np.atleast_2d(np.asarray(X_std, dtype=float))
        return self.input_lower + (X_std + 1.0) * (self.input_upper - self.input_lower) / 2.0

    def transform_response(self, F_raw):
        return (np.asarray(F_raw, dtype=float) - self.response_mean) / self.response_sd

    def inverse_response(self, F_std):
        return np.asarray(F_std, dtype=float) * self.response_sd + self.response_mean

    def inverse_sd(self, sd_std):
        return np.asarray(sd_std, dtype=float) * self.response_sd


def standardize(X_raw, F_raw, input_ranges=None):
    """Fit a Standardizer and return it with the standardized ensemble."""
    s = Standardizer.fit(X_raw, F_raw, input_ranges)
    return s, s.transform_inputs(X_raw), s.transform_response(F_raw)


# ---------------------------------------------------------------------------
# Latin hypercubes
# ---------------------------------------------------------------------------


def _base_lhc(n, p, rng):
    """Random LHC on [-1,1]^p: permuted strata with within-cell jitter."""
    u = np.empty((n, p))
    for j in range(p):
        perm = rng.permutation(n)
        u[:, j] = (perm + rng.random(n)) / n
    return 2.0 * u - 1.0


def _min_dist(points):
    if points.shape[0] < 2:
        return np.inf
    return float(pdist(points).min())


def _min_dist_with(points, extra):
    """Min distance within `points` union `extra` involving at least one of `points`."""
    d_within = _min_dist(points)
    if extra is None or extra.shape[0] == 0:
        return d_within
    cross = np.sqrt(
        np.sum((points[:, None, :] - extra[None, :, :]) ** 2, axis=-1)
    ).min()
    return min(d_within, float(cross))


def _optimize_lhc(points, rng, iters, fixed=None):
    """Swap-based maximin optimization preserving the LHC column structure.

    A move swaps two rows' values in one column (keeps stratification) and is
    accepted when it does not decrease the minimum pairwise distance of the
    union with `fixed`.
    """
    n, p = points.shape
    best = points.copy()
    best_crit = _min_dist_with(best, fixed)
    for _ in range(iters):
        i, k = rng.integers(0, n, size=2)
        if i == k:
            continue
        j = rng.integers(0, p)
        cand = best.copy()
        cand[i, j], cand[k, j] = cand[k, j], cand[i, j]
        crit = _min_dist_with(cand, fixed)
        if crit > best_crit:
            best, best_crit = cand, crit
    return best, best_crit


def maximin_lhc(n, p, seed=0, optim_iters=2000, restarts=20):
    """Maximin-optimized Latin hypercube on [-1,1]^p, deterministic in seed."""
    if n < 2 or p < 1:
        raise DesignError("need n >= 2 and p >= 1")
    if optim_iters < 1:
        raise DesignError("optim_iters must be positive")
    rng = np.random.default_rng(seed)
    points = max(
        (_base_lhc(n, p, rng) for _ in range(max(1, restarts))), key=_min_dist
    )
    points, crit = _optimize_lhc(points, rng, optim_iters)
    return Design(points=points, fold_labels=np.zeros(n, dtype=int), seed=seed, criterion=crit)


def extend_lhc(existing, n_add, seed=0, optim_iters=2000):
    """Add an LHC sub-design optimized for the maximin of the union.

    The new fold is itself a Latin hypercube; its label is one past the
    current maximum so LOLHO folds stay identifiable.
    """
    if n_add < 2:
        raise DesignError("need n_add >= 2")
    if optim_iters < 1:
        raise DesignError("optim_iters must be positive")
    rng = np.random.default_rng(seed)
    new = _base_lhc(n_add, existing.p, rng)
    new, _ = _optimize_lhc(new, rng, optim_iters, fixed=existing.points)
    points = np.vstack([existing.points, new])
    labels = np.concatenate(
        [existing.fold_labels, np.full(n_add, existing.fold_labels.max() + 1, dtype=int)]
    )
    return Design(points=points, fold_labels=labels, seed=seed, criterion=_min_dist(points))


def extended_lhc(n_per_fold, n_folds, p, seed=0, optim_iters=2000):
    """k-extended LHC: `n_folds` sequentially added LHCs of `n_per_fold` points."""
    design = maximin_lhc(n_per_fold, p, seed=seed, optim_iters=optim_iters)
    for k in range(1, n_folds):
        design = extend_lhc(design, n_per_fold, seed=seed + 1000 * k, optim_iters=optim_iters)
    return design
