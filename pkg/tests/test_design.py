"""Latin hypercube designs and standardization."""

import numpy as np
import pytest

from mixemu.design import (
    DesignError,
    Standardizer,
    extend_lhc,
    extended_lhc,
    maximin_lhc,
    standardize,
)


def _is_lhc(points):
    """Each column hits every one of the n equal-width strata exactly once."""
    n, p = points.shape
    u = (points + 1.0) / 2.0
    for j in range(p):
        strata = np.floor(u[:, j] * n).astype(int)
        strata = np.clip(strata, 0, n - 1)
        if not np.array_equal(np.sort(strata), np.arange(n)):
            return False
    return True


def test_maximin_lhc_structure_and_bounds():
    d = maximin_lhc(20, 3, seed=1)
    assert d.points.shape == (20, 3)
    assert np.all(d.points > -1) and np.all(d.points < 1)
    assert _is_lhc(d.points)
    assert d.criterion > 0


def test_maximin_lhc_deterministic_in_seed():
    a = maximin_lhc(15, 2, seed=9)
    b = maximin_lhc(15, 2, seed=9)
    np.testing.assert_array_equal(a.points, b.points)
    c = maximin_lhc(15, 2, seed=10)
    assert not np.array_equal(a.points, c.points)


def test_maximin_optimization_improves_over_random():
    # the optimized criterion should beat a single unoptimized hypercube
    raw = maximin_lhc(25, 2, seed=4, optim_iters=1, restarts=1)
    opt = maximin_lhc(25, 2, seed=4, optim_iters=4000, restarts=20)
    assert opt.criterion > raw.criterion


def test_extend_lhc_adds_labelled_lhc_fold():
    base = maximin_lhc(10, 2, seed=0)
    ext = extend_lhc(base, 10, seed=5)
    assert ext.points.shape == (20, 2)
    np.testing.assert_array_equal(ext.fold_labels, np.r_[np.zeros(10), np.ones(10)].astype(int))
    assert _is_lhc(ext.points[10:])  # new fold is itself a hypercube
    np.testing.assert_array_equal(ext.points[:10], base.points)  # old points fixed


def test_extended_lhc_fold_bookkeeping():
    d = extended_lhc(12, 4, 5, seed=3)
    assert d.points.shape == (48, 5)
    np.testing.assert_array_equal(np.bincount(d.fold_labels), [12, 12, 12, 12])
    folds = d.folds()
    assert len(folds) == 4
    for idx in folds:
        assert _is_lhc(d.points[idx])


def test_design_input_validation():
    with pytest.raises(DesignError):
        maximin_lhc(1, 2)
    with pytest.raises(DesignError):
        maximin_lhc(10, 0)
    with pytest.raises(DesignError):
        extend_lhc(maximin_lhc(5, 2), 1)


# ---------------------------------------------------------------------------
# standardization
# ---------------------------------------------------------------------------


def test_standardizer_round_trip():
    rng = np.random.default_rng(2)
    X = rng.uniform(3.0, 9.0, (30, 2))
    F = rng.standard_normal(30) * 12 + 100
    s, Xs, Fs = standardize(X, F, input_ranges=[(3.0, 9.0), (3.0, 9.0)])
    assert np.all(Xs >= -1) and np.all(Xs <= 1)
    assert Fs.mean() == pytest.approx(0.0, abs=1e-12)
    assert Fs.std(ddof=1) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(s.inverse_inputs(Xs), X, atol=1e-12)
    np.testing.assert_allclose(s.inverse_response(Fs), F, atol=1e-9)


def test_standardizer_exact_corners():
    s = Standardizer(
        input_lower=np.array([0.0]), input_upper=np.array([10.0]),
        response_mean=5.0, response_sd=2.0,
    )
    np.testing.assert_allclose(s.transform_inputs([[0.0], [5.0], [10.0]]),
                               [[-1.0], [0.0], [1.0]])
    assert s.transform_response(9.0) == pytest.approx(2.0)
    assert s.inverse_sd(1.5) == pytest.approx(3.0)


def test_standardizer_observed_ranges_default():
    X = np.array([[2.0], [4.0], [6.0]])
    s = Standardizer.fit(X, np.array([1.0, 2.0, 3.0]))
    np.testing.assert_allclose(s.transform_inputs(X).ravel(), [-1.0, 0.0, 1.0])


def test_standardizer_rejects_degenerate_input():
    with pytest.raises(DesignError):
        Standardizer.fit(np.zeros((3, 1)), np.ones(3))  # constant response
    with pytest.raises(DesignError):
        Standardizer.fit(np.zeros((3, 1)), np.arange(3.0), input_ranges=[(1.0, 1.0)])
