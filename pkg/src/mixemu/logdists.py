"""Hand-rolled log densities for the hot MCMC loops.

scipy.stats equivalents are used in the tests as oracles; these stay free of
frozen-distribution overhead.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

LOG_2PI = math.log(2.0 * math.pi)


def norm_logpdf(x, mean=0.0, sd=1.0):
    sd = np.asarray(sd, dtype=float)
    z = (np.asarray(x, dtype=float) - mean) / sd
    return -0.5 * z * z - np.log(sd) - 0.5 * LOG_2PI


def gamma_logpdf(x, shape, rate):
    x = np.asarray(x, dtype=float)
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def invgamma_logpdf(x, shape, scale):
    x = np.asarray(x, dtype=float)
    return shape * math.log(scale) - math.lgamma(shape) - (shape + 1.0) * np.log(x) - scale / x


def lognorm_logpdf(x, mu, sigma):
    x = np.asarray(x, dtype=float)
    lx = np.log(x)
    z = (lx - mu) / sigma
    return -lx - math.log(sigma) - 0.5 * LOG_2PI - 0.5 * z * z
