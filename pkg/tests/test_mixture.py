"""Residual mixture model: softmax weights, marginal likelihood, WAIC, L choice."""

import warnings

import numpy as np
import pytest
from scipy import stats

import oracles
from mixemu.mixture import (
    FeatureMap,
    MixtureError,
    MixtureFit,
    MixturePrior,
    fit_mixture,
    mixing_weights,
    mixture_marginal_log_posterior,
    pointwise_log_likelihood,
    select_regions,
    waic,
)
from mixemu.sampler import DrawSet, SamplerConfig


# ---------------------------------------------------------------------------
# mixing weights
# ---------------------------------------------------------------------------


def test_softmax_hand_values():
    # logits (1, 0): weights (1/(1+e^-1), 1/(1+e)) = (0.731058..., 0.268941...)
    A = np.array([[1.0], [0.0]])
    w = mixing_weights(A, np.array([1.0]))
    assert w[0] == pytest.approx(0.7310585786300049, abs=1e-15)
    assert w[1] == pytest.approx(0.2689414213699951, abs=1e-15)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 2))
    X = rng.uniform(-1, 1, (10, 2))
    base = mixing_weights(A, X)
    shifted = mixing_weights(A + np.array([5.0, -3.0]), X)
    np.testing.assert_allclose(shifted, base, atol=1e-12)


def test_softmax_simplex_and_stability():
    rng = np.random.default_rng(1)
    for _ in range(20):
        A = rng.standard_normal((4, 3)) * 50  # large logits must not overflow
        X = rng.uniform(-1, 1, (6, 3))
        w = mixing_weights(A, X)
        assert np.all(w >= 0) and np.all(np.isfinite(w))
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_feature_map_intercept():
    fm = FeatureMap(intercept=True)
    g = fm(np.array([[0.5, -0.5]]))
    np.testing.assert_array_equal(g, [[1.0, 0.5, -0.5]])
    assert fm.dim(2) == 3 and FeatureMap().dim(2) == 2


# ---------------------------------------------------------------------------
# marginal likelihood vs label enumeration
# ---------------------------------------------------------------------------


def test_marginal_likelihood_matches_enumeration_50_settings():
    # collapsed likelihood == explicit sum over all L^n label assignments
    rng = np.random.default_rng(2)
    prior = MixturePrior()
    for _ in range(50):
        n = int(rng.integers(2, 9))
        p = int(rng.integers(1, 3))
        L = int(rng.integers(1, 4))
        X = rng.uniform(-1, 1, (n, p))
        e = rng.standard_normal(n)
        zeta = np.sort(rng.uniform(0.2, 2.5, L))
        A = rng.standard_normal((L, p))
        got = mixture_marginal_log_posterior(A if L > 1 else None, zeta, e, X, prior)
        got -= prior.log_density(A if L > 1 else None, zeta)
        lam = mixing_weights(A, X) if L > 1 else np.ones((n, 1))
        lam = np.atleast_2d(lam)
        want = oracles.mixture_loglik_enumeration(e, lam, zeta)
        assert got == pytest.approx(want, abs=1e-10)


def test_marginal_likelihood_label_permutation_invariance():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, (12, 2))
    e = rng.standard_normal(12)
    A = rng.standard_normal((3, 2))
    zeta = np.array([0.3, 0.9, 1.7])
    base = mixture_marginal_log_posterior(A, zeta, e, X)
    perm = np.array([2, 0, 1])
    permuted = mixture_marginal_log_posterior(A[perm], zeta[perm], e, X)
    assert permuted == pytest.approx(base, abs=1e-10)


def test_marginal_likelihood_rejects_bad_scales():
    with pytest.raises(MixtureError):
        mixture_marginal_log_posterior(None, [-0.5], np.zeros(3), np.zeros((3, 1)))


# ---------------------------------------------------------------------------
# WAIC
# ---------------------------------------------------------------------------


def _hand_fit(L, X, e, draws, feature_map=FeatureMap()):
    """MixtureFit pinned at explicit draws (M, L*gdim + L)."""
    return MixtureFit(
        L=L,
        X=np.atleast_2d(X),
        e=np.asarray(e, float),
        drawset=DrawSet(by_chain=np.asarray(draws, float)[None, :, :]),
        feature_map=feature_map,
        converged=True,
    )


def test_waic_matches_hand_computation():
    # two points, two fixed draws of a 2-region mixture
    X = np.array([[0.5], [-0.5]])
    e = np.array([0.3, -1.2])
    draws = np.array(
        [
            [1.0, -1.0, 0.4, 1.5],  # A rows (1.0), (-1.0); zetas 0.4, 1.5
            [0.5, -0.5, 0.3, 2.0],
        ]
    )
    fit = _hand_fit(2, X, e, draws)
    ll = np.empty((2, 2))
    for m in range(2):
        A = draws[m, :2].reshape(2, 1)
        zeta = draws[m, 2:]
        lam = mixing_weights(A, X)
        for i in range(2):
            ll[m, i] = np.log(
                lam[i, 0] * stats.norm.pdf(e[i], 0, zeta[0])
                + lam[i, 1] * stats.norm.pdf(e[i], 0, zeta[1])
            )
    np.testing.assert_allclose(pointwise_log_likelihood(fit, e, X), ll, atol=1e-12)
    assert waic(fit, e, X) == pytest.approx(oracles.waic_by_hand(ll), abs=1e-10)


def test_waic_single_draw_has_zero_penalty():
    X = np.array([[0.0], [1.0], [-1.0]])
    e = np.array([0.1, -0.2, 0.5])
    draws = np.array([[0.7]])  # L=1: a single scale draw
    fit = _hand_fit(1, X, e, draws)
    want = -2.0 * float(np.sum(stats.norm.logpdf(e, 0, 0.7)))
    assert waic(fit, e, X) == pytest.approx(want, abs=1e-10)


# ---------------------------------------------------------------------------
# fitting and selection
# ---------------------------------------------------------------------------


def _cfg(seed, warm=800, keep=1200):
    return SamplerConfig(chains=2, warmup_iters=warm, keep_iters=keep, seed=seed)


def test_fit_mixture_validation():
    X = np.zeros((8, 1))
    e = np.zeros(8)
    with pytest.raises(MixtureError):
        fit_mixture(X, e, 0)
    with pytest.raises(MixtureError):
        fit_mixture(X, e, 2)  # needs n >= 10


def test_fit_mixture_draw_invariants_and_lambda_simplex():
    rng = np.random.default_rng(4)
    X = np.linspace(-1, 1, 30)[:, None]
    e = rng.standard_normal(30) * np.where(X[:, 0] < 0, 1.5, 0.4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fit = fit_mixture(X, e, 2, config=_cfg(0))
    zets = fit._zeta_draws()
    assert np.all(zets > 0)
    assert np.all(np.diff(zets, axis=1) > 0)  # ordered scales, every draw
    lam = fit.lambda_hat(np.array([[-0.5], [0.5]]))
    assert lam.shape == (2, 2)
    np.testing.assert_allclose(lam.sum(axis=1), 1.0, atol=1e-10)
    assert np.isfinite(fit.waic)


def test_lambda_hat_identifies_rough_region():
    # high-scale region should dominate where residuals are wide, in most seeds
    hits = 0
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        X = np.linspace(-1, 1, 40)[:, None]
        sd = np.where(X[:, 0] < 0, 1.5, 0.2)
        e = rng.standard_normal(40) * sd
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_mixture(X, e, 2, config=_cfg(seed))
        lam = fit.lambda_hat(np.array([[-0.9], [0.9]]))
        # region index 1 is the larger scale (ordered zetas)
        if lam[0, 1] > 0.5 and lam[1, 0] > 0.5:
            hits += 1
    assert hits >= 8


def test_select_regions_prefers_one_region_for_homoscedastic_noise():
    wins = 0
    for seed in range(5):
        rng = np.random.default_rng(200 + seed)
        X = np.linspace(-1, 1, 30)[:, None]
        e = rng.standard_normal(30)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = select_regions(X, e, L_max=2, config=_cfg(seed))
        if report.selected_L == 1:
            wins += 1
    assert wins >= 4


def test_select_regions_report_bookkeeping():
    rng = np.random.default_rng(5)
    X = np.linspace(-1, 1, 30)[:, None]
    e = rng.standard_normal(30) * np.where(X[:, 0] < 0, 1.5, 0.3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        report = select_regions(X, e, L_max=2, config=_cfg(11))
    assert set(report.waic) | set(report.excluded) >= {1, 2}
    assert report.selected_L in report.fits
    table = report.table()
    assert "selected L" in table and "WAIC" in table


def test_select_regions_validation():
    with pytest.raises(MixtureError):
        select_regions(np.zeros((10, 1)), np.zeros(10), L_max=0)
