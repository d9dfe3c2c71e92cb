"""Correlation functions, kernel-matrix assembly and safeguarded Cholesky.

Everything downstream (stationary and mixture emulators alike) builds its
covariance matrices through this module.  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_JITTER_SCHEDULE = (0.0, 1e-10, 1e-8, 1e-6)


class KernelError(ValueError):
    """Invalid kernel specification or incompatible arguments."""


class FactorizationError(np.linalg.LinAlgError):
    """Matrix could not be factorized even with the maximum jitter."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True)
class CorrelationSpec:
    """Power-exponential correlation with per-dimension lengthscales.

    Parameters
    ----------
    lengthscales : array_like, shape (p,)
        Positive correlation lengths, one per input dimension.
    exponents : array_like, shape (p,), optional
        Smoothness exponents in (0, 2].  Default 2 everywhere (squared
        exponential).
    """

    lengthscales: np.ndarray
    exponents: np.ndarray = None

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size < 1:
            raise KernelError("lengthscales must be a 1-D vector")
        if np.any(ls <= 0) or not np.all(np.isfinite(ls)):
            raise KernelError("lengthscales must be positive and finite")
        ex = self.exponents
        if ex is None:
            ex = np.full(ls.size, 2.0)
        ex = np.atleast_1d(np.asarray(ex, dtype=float))
        if ex.shape != ls.shape:
            raise KernelError("exponents must match lengthscales in length")
        if np.any(ex <= 0) or np.any(ex > 2):
            raise KernelError("exponents must lie in (0, 2]")
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "exponents", ex)

    @property
    def ndim(self):
        return self.lengthscales.size


@dataclass(frozen=True)
class StationaryKernelSpec:
    """Stationary covariance: variance * correlation + nugget on exact ties."""

    corr: CorrelationSpec
    variance: float
    nugget: float = 0.0

    def __post_init__(self):
        if not (self.variance > 0 and np.isfinite(self.variance)):
            raise KernelError("variance must be positive")
        if not (self.nugget >= 0 and np.isfinite(self.nugget)):
            raise KernelError("nugget must be nonnegative")


def power_exp_corr(x, x2, spec):
    """Power-exponential correlation between two points.

    Returns exp(-sum_j (|x_j - x2_j| / delta_j)**phi_j), in (0, 1].
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape or x.size != spec.ndim:
        raise KernelError(
            f"point dimensions {x.shape}/{x2.shape} do not match spec p={spec.ndim}"
        )
    scaled = np.abs(x - x2) / spec.lengthscales
    return float(np.exp(-np.sum(scaled**spec.exponents)))


def stationary_cov(x, x2, spec):
    """Stationary covariance with nugget added on bitwise-equal points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    value = spec.variance * power_exp_corr(x, x2, spec.corr)
    if np.array_equal(x, x2):
        value += spec.nugget
    return float(value)


def kernel_matrix(X, X2, cov):
    """Assemble the matrix of pairwise covariances cov(x_i, x2_j)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X.shape[1] != X2.shape[1]:
        raise KernelError("X and X2 must have the same number of columns")
    out = np.empty((X.shape[0], X2.shape[0]))
    for i in range(X.shape[0]):
        for j in range(X2.shape[0]):
            out[i, j] = cov(X[i], X2[j])
    return out


def correlation_matrix(X, X2, spec):
    """Vectorized power-exponential correlation matrix (n x m)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    if X.shape[1] != X2.shape[1] or X.shape[1] != spec.ndim:
        raise KernelError("column counts must equal the spec dimension")
    scaled = np.abs(X[:, None, :] - X2[None, :, :]) / spec.lengthscales
    return np.exp(-np.sum(scaled**spec.exponents, axis=-1))


def equality_mask(X, X2):
    """Boolean (n x m) mask of bitwise-equal rows; carrier of the nugget."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = np.atleast_2d(np.asarray(X2, dtype=float))
    return np.all(X[:, None, :] == X2[None, :, :], axis=-1)


def stationary_kernel_matrix(X, X2, spec):
    """Vectorized stationary covariance matrix, nugget on exact row ties."""
    K = spec.variance * correlation_matrix(X, X2, spec.corr)
    if spec.nugget > 0:
        K = K + spec.nugget * equality_mask(X, X2)
    return K


def safe_cholesky(M, jitter_schedule=DEFAULT_JITTER_SCHEDULE):
    """Lower Cholesky factor of M + j*I for the smallest workable jitter.

    Returns
    -------
    (L, jitter) : (ndarray, float)

    Raises
    ------
    FactorizationError
        If every jitter in the schedule fails; carries the smallest
        eigenvalue of M for diagnosis.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise KernelError("M must be a square matrix")
    eye = np.eye(M.shape[0])
    for jitter in jitter_schedule:
        try:
            L = np.linalg.cholesky(M + jitter * eye if jitter else M)
            return L, float(jitter)
        except np.linalg.LinAlgError:
            continue
    min_eig = float(np.linalg.eigvalsh(M).min())
    raise FactorizationError(
        f"Cholesky failed for all jitters {tuple(jitter_schedule)}; "
        f"min eigenvalue {min_eig:.3e}",
        min_eigenvalue=min_eig,
    )
