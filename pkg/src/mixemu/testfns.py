"""Synthetic test functions with region-dependent smoothness.

Both functions are registered for ensemble generation under the names
``wavy2d`` and ``piecewise5d``.
"""

from __future__ import annotations

import numpy as np


class DomainError(ValueError):
    pass


def wavy2d(x1, x2):
    """2D wave: rapid oscillation near the origin, smooth toward (1, 1).

    f(x1, x2) = sin(1 / ((0.7*x1 + 0.3) * (0.7*x2 + 0.3))) on [0, 1]^2.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any((x1 < 0) | (x1 > 1) | (x2 < 0) | (x2 > 1)):
        raise DomainError("wavy2d is defined on [0, 1]^2")
    return np.sin(1.0 / ((0.7 * x1 + 0.3) * (0.7 * x2 + 0.3)))


# Linear coefficients and per-region (amplitude, frequency) pairs for the 5D
# function.  Amplitude*frequency decreases left to right so the response gets
# smoother as x5 grows.  Override via the keyword arguments of piecewise5d.
PIECEWISE5D_LINEAR = (1.0, 0.5, 0.5, 0.5, 0.5)
PIECEWISE5D_WAVES = ((2.0, 40.0), (1.5, 20.0), (1.0, 10.0), (0.6, 5.0), (0.3, 2.0))
PIECEWISE5D_BUFFER = 0.08


def _region_layout(n_regions, buffer_width):
    """White-interval edges on [-1,1] with fixed-width blend buffers between."""
    white = (2.0 - (n_regions - 1) * buffer_width) / n_regions
    edges = []
    left = -1.0
    for _ in range(n_regions):
        edges.append((left, left + white))
        left += white + buffer_width
    return edges


def piecewise5d_boundaries(buffer_width=PIECEWISE5D_BUFFER, n_regions=None):
    """All white/buffer interval endpoints interior to [-1, 1]."""
    n_regions = n_regions or len(PIECEWISE5D_WAVES)
    edges = _region_layout(n_regions, buffer_width)
    bounds = []
    for k, (a, b) in enumerate(edges):
        if k > 0:
            bounds.append(a)
        if k < n_regions - 1:
            bounds.append(b)
    return np.asarray(bounds)


def piecewise5d(x, linear=PIECEWISE5D_LINEAR, waves=PIECEWISE5D_WAVES,
                buffer_width=PIECEWISE5D_BUFFER):
    """5D function, linear in x1..x4 with an x5 oscillation whose amplitude
    and frequency are piecewise constant, cosine-blended across buffer
    intervals so the function stays continuous.

    Accepts a single 5-vector or an (n, 5) array; domain [-1, 1]^5.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != 5:
        raise DomainError("piecewise5d expects 5 inputs")
    if np.any(np.abs(X) > 1):
        raise DomainError("piecewise5d is defined on [-1, 1]^5")

    b0, b1, b2, b3, b4 = linear
    base = b0 + b1 * X[:, 0] + b2 * X[:, 1] + b3 * X[:, 2] + b4 * X[:, 3]
    x5 = X[:, 4]

    edges = _region_layout(len(waves), buffer_width)
    osc = np.zeros_like(x5)
    for i, val in enumerate(x5):
        osc[i] = _oscillation(val, edges, waves, buffer_width)
    out = base + osc
    return float(out[0]) if single else out


def _oscillation(x5, edges, waves, buffer_width):
    for k, (a, b) in enumerate(edges):
        if a <= x5 <= b:
            amp, freq = waves[k]
            return amp * np.sin(freq * x5)
        if k < len(edges) - 1 and b < x5 < edges[k + 1][0]:
            # cosine-ramp blend of the two neighbouring region functions
            t = (x5 - b) / buffer_width
            w = 0.5 * (1.0 - np.cos(np.pi * t))
            amp0, freq0 = waves[k]
            amp1, freq1 = waves[k + 1]
            return (1.0 - w) * amp0 * np.sin(freq0 * x5) + w * amp1 * np.sin(freq1 * x5)
    # numerical edge of the domain
    amp, freq = waves[0] if x5 < 0 else waves[-1]
    return amp * np.sin(freq * x5)


REGISTRY = {
    "wavy2d": {
        "ndim": 2,
        "domain": [(0.0, 1.0), (0.0, 1.0)],
        "fn": lambda X: wavy2d(X[:, 0], X[:, 1]),
    },
    "piecewise5d": {
        "ndim": 5,
        "domain": [(-1.0, 1.0)] * 5,
        "fn": lambda X: piecewise5d(X),
    },
}


def evaluate(name, X):
    """Evaluate a registered test function row-wise on its native domain."""
    if name not in REGISTRY:
        raise KeyError(f"unknown test function {name!r}; have {sorted(REGISTRY)}")
    entry = REGISTRY[name]
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != entry["ndim"]:
        raise DomainError(f"{name} expects {entry['ndim']} inputs")
    return entry["fn"](X)
