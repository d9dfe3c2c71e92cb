"""Scoring rules and the fold-based (LOLHO) validation harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm


class ValidationError(ValueError):
    pass


def interval_score(lower, upper, y, alpha=0.05):
    """Interval score: width plus 2/alpha penalties for misses.

    Vectorized over equal-length inputs; lower is better.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(lower > upper):
        raise ValidationError("need lower <= upper")
    if not (0 < alpha < 1):
        raise ValidationError("alpha must lie in (0, 1)")
    score = (upper - lower)
    score = score + (2.0 / alpha) * (lower - y) * (y < lower)
    score = score + (2.0 / alpha) * (y - upper) * (y > upper)
    return score if score.ndim else float(score)


def rmse(predictions, truths):
    """Root mean squared error."""
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if predictions.size == 0 or predictions.shape != truths.shape:
        raise ValidationError("predictions and truths must be nonempty and equal length")
    return float(np.sqrt(np.mean((predictions - truths) ** 2)))


@dataclass
class ScoredPredictions:
    """Per-point scores for a set of Gaussian predictive summaries."""

    truth: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    lower: np.ndarray  # exact (1-alpha) interval
    upper: np.ndarray
    lower_2sd: np.ndarray
    upper_2sd: np.ndarray
    alpha: float
    interval_scores: np.ndarray
    standardized_errors: np.ndarray
    inside: np.ndarray

    @property
    def mean_interval_score(self):
        return float(np.mean(self.interval_scores))

    @property
    def rmse(self):
        return rmse(self.mean, self.truth)

    @property
    def coverage_count(self):
        return int(np.sum(self.inside))

    @property
    def n(self):
        return self.truth.size


def score_predictions(truth, mean, sd, alpha=0.05):
    """Score Gaussian summaries: exact z interval for the interval score,
    two-standard-deviation interval reported alongside."""
    truth = np.asarray(truth, dtype=float)
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    z = norm.ppf(1.0 - alpha / 2.0)
    lower, upper = mean - z * sd, mean + z * sd
    scores = interval_score(lower, upper, truth, alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        std_err = np.where(sd > 0, (truth - mean) / sd, np.inf * np.sign(truth - mean))
    return ScoredPredictions(
        truth=truth,
        mean=mean,
        sd=sd,
        lower=lower,
        upper=upper,
        lower_2sd=mean - 2.0 * sd,
        upper_2sd=mean + 2.0 * sd,
        alpha=alpha,
        interval_scores=np.atleast_1d(scores),
        standardized_errors=std_err,
        inside=(truth >= lower) & (truth <= upper),
    )


@dataclass
class FoldReport:
    fold: int
    scores: ScoredPredictions = None
    failed: bool = False
    failure: str = ""

    @property
    def mean_interval_score(self):
        return self.scores.mean_interval_score if self.scores else float("nan")

    @property
    def rmse(self):
        return self.scores.rmse if self.scores else float("nan")


def lolho_report(points, fold_labels, responses, emulator_factory, alpha=0.05):
    """Leave-one-Latin-hypercube-out diagnostics.

    For each fold, `emulator_factory(X_train, F_train)` must refit the whole
    pipeline on the remaining folds and return a predictor with a
    ``predict(X) -> (mean, sd)`` method (or callable returning that pair).
    The held-out fold is then scored.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    fold_labels = np.asarray(fold_labels)
    responses = np.asarray(responses, dtype=float)
    folds = np.unique(fold_labels)
    if folds.size < 2:
        raise ValidationError("need at least 2 folds")

    reports = []
    for fold in folds:
        held = fold_labels == fold
        X_train, F_train = points[~held], responses[~held]
        X_test, F_test = points[held], responses[held]
        try:
            predictor = emulator_factory(X_train, F_train)
            predict = getattr(predictor, "predict", predictor)
            mean, sd = predict(X_test)
            reports.append(
                FoldReport(fold=int(fold), scores=score_predictions(F_test, mean, sd, alpha))
            )
        except Exception as err:  # keep scoring the remaining folds
            reports.append(FoldReport(fold=int(fold), failed=True, failure=str(err)))
    return reports


def score_table(rows, fold_ids):
    """Plain-text table of interval scores per emulator and fold."""
    header = "Model      " + "".join(f"  Fold {k:<4}" for k in fold_ids)
    lines = [header]
    for name, values in rows:
        lines.append(f"{name:<11}" + "".join(f"  {v:8.3f}" for v in values))
    return "\n".join(lines)
