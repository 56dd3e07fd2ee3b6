"""Scores for probabilistic binary classifiers and Platt scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .core import hard_labels, require_nonempty
from .errors import EmptySample, InvalidConfig, LengthMismatch, SingleClass
from .losses import LOG_ZERO

PLATT_CLAMP = 1e-9


def _binary_inputs(predictions, labels):
    P = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=int)
    if P.ndim == 1:
        scores = P
    else:
        scores = P[:, 1]
    if scores.shape[0] != y.shape[0]:
        raise LengthMismatch(f"{scores.shape[0]} predictions for {y.shape[0]} labels")
    require_nonempty(y.shape[0])
    return scores, (y == 1).astype(float)


def brier_score(predictions, labels) -> float:
    """Mean of ``(c1 - 1[y = 1])**2``.

    ``predictions`` may be an ``(N, 2)`` array of probability vectors or a 1-d
    array of class-1 scores.
    """
    s, o = _binary_inputs(predictions, labels)
    return float(np.mean((s - o) ** 2))


def brier_score_multiclass(predictions, labels) -> float:
    """Sum over classes of squared errors against the one-hot label, averaged."""
    P = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=int)
    if P.shape[0] != y.shape[0]:
        raise LengthMismatch("predictions and labels differ in length")
    require_nonempty(y.shape[0])
    onehot = np.eye(P.shape[1])[y]
    return float(np.mean(((P - onehot) ** 2).sum(axis=1)))


@dataclass(frozen=True)
class BrierDecomposition:
    brier: float
    calibration: float
    refinement: float
    bins: int = 10


def bin_indices(scores, n_bins: int) -> np.ndarray:
    """Equal-width bins on [0, 1]; 1.0 falls in the last bin."""
    return np.minimum((np.asarray(scores) * n_bins).astype(int), n_bins - 1)


def brier_decomposition(predictions, labels, n_bins: int = 10) -> BrierDecomposition:
    """Split the Brier score into calibration and refinement over equal-width bins.

    ``calibration + refinement`` equals the Brier score of the predictions
    after each is replaced by its bin mean; the raw score differs from that by
    the within-bin spread of the predictions.
    """
    if n_bins < 1:
        raise InvalidConfig("need at least one bin")
    s, o = _binary_inputs(predictions, labels)
    N = s.size
    b = bin_indices(s, n_bins)
    n_k = np.bincount(b, minlength=n_bins).astype(float)
    occupied = n_k > 0
    f_bar = np.bincount(b, weights=s, minlength=n_bins)[occupied] / n_k[occupied]
    o_bar = np.bincount(b, weights=o, minlength=n_bins)[occupied] / n_k[occupied]
    w = n_k[occupied] / N
    calibration = float(np.sum(w * (f_bar - o_bar) ** 2))
    refinement = float(np.sum(w * o_bar * (1.0 - o_bar)))
    return BrierDecomposition(float(np.mean((s - o) ** 2)), calibration, refinement, n_bins)


def binned_brier(predictions, labels, n_bins: int = 10) -> float:
    """Brier score after replacing each prediction by the mean of its bin."""
    s, o = _binary_inputs(predictions, labels)
    b = bin_indices(s, n_bins)
    n_k = np.bincount(b, minlength=n_bins)
    means = np.bincount(b, weights=s, minlength=n_bins) / np.maximum(n_k, 1)
    return float(np.mean((means[b] - o) ** 2))


def reliability_table(predictions, labels, n_bins: int = 10) -> list:
    """Per-bin rows ``(lower, upper, count, mean_prediction, observed_frequency)``."""
    s, o = _binary_inputs(predictions, labels)
    b = bin_indices(s, n_bins)
    rows = []
    for k in range(n_bins):
        mask = b == k
        n = int(mask.sum())
        rows.append((k / n_bins, (k + 1) / n_bins, n,
                     float(s[mask].mean()) if n else float("nan"),
                     float(o[mask].mean()) if n else float("nan")))
    return rows


@dataclass(frozen=True)
class NllResult:
    value: float
    hit_zero: bool


def nll_per_sample(predictions, labels) -> NllResult:
    """Mean of ``-log c_y``. A zero probability on the true class contributes
    ``-LOG_ZERO`` and sets ``hit_zero``."""
    P = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=int)
    if P.shape[0] != y.shape[0]:
        raise LengthMismatch("predictions and labels differ in length")
    require_nonempty(y.shape[0])
    c = P[np.arange(y.size), y]
    zero = c <= 0
    with np.errstate(divide="ignore"):
        terms = np.where(zero, -LOG_ZERO, -np.log(np.where(zero, 1.0, c)))
    return NllResult(float(terms.mean()), bool(zero.any()))


@dataclass(frozen=True)
class AccuracyPrecision:
    accuracy: float
    precision: tuple
    undefined: tuple  # classes that were never predicted; their precision is 0


def accuracy_and_precision(predictions, labels) -> AccuracyPrecision:
    P = np.asarray(predictions, dtype=float)
    y = np.asarray(labels, dtype=int)
    if P.shape[0] != y.shape[0]:
        raise LengthMismatch("predictions and labels differ in length")
    require_nonempty(y.shape[0])
    yhat = hard_labels(P)
    precision, undefined = [], []
    for k in range(P.shape[1]):
        predicted = yhat == k
        if predicted.any():
            precision.append(float(np.mean(y[predicted] == k)))
        else:
            precision.append(0.0)
            undefined.append(k)
    return AccuracyPrecision(float(np.mean(yhat == y)), tuple(precision), tuple(undefined))


@dataclass(frozen=True)
class PlattParams:
    a: float
    b: float


def _platt_feature(scores) -> np.ndarray:
    return logit(np.clip(np.asarray(scores, dtype=float), PLATT_CLAMP, 1 - PLATT_CLAMP))


def platt_log_likelihood(params: PlattParams, scores, labels) -> float:
    x = _platt_feature(scores)
    o = (np.asarray(labels) == 1).astype(float)
    t = params.a * x + params.b
    # log sigmoid(t) = -logaddexp(0, -t)
    return float(-(o * np.logaddexp(0, -t) + (1 - o) * np.logaddexp(0, t)).sum())


def platt_fit(scores, labels, max_iterations: int = 100, tol: float = 1e-12) -> PlattParams:
    """Fit ``sigmoid(a * logit(score) + b)`` by damped Newton steps on the log-likelihood."""
    s = np.asarray(scores, dtype=float)
    if s.ndim == 2:
        s = s[:, 1]
    o = (np.asarray(labels) == 1).astype(float)
    if s.size != o.size:
        raise LengthMismatch("scores and labels differ in length")
    if s.size == 0:
        raise EmptySample("no scores to fit")
    if o.min() == o.max():
        raise SingleClass("Platt scaling needs both classes")
    X = np.column_stack([_platt_feature(s), np.ones_like(s)])
    theta = np.array([1.0, 0.0])

    def ll(th):
        t = X @ th
        return float(-(o * np.logaddexp(0, -t) + (1 - o) * np.logaddexp(0, t)).sum())

    current = ll(theta)
    for _ in range(max_iterations):
        mu = expit(X @ theta)
        grad = X.T @ (o - mu)
        H = (X * (mu * (1 - mu))[:, None]).T @ X + 1e-12 * np.eye(2)
        direction = np.linalg.solve(H, grad)
        step = 1.0
        while step > 1e-10:
            candidate = theta + step * direction
            value = ll(candidate)
            if value >= current:
                break
            step *= 0.5
        else:
            break
        gain = value - current
        theta, current = candidate, value
        if gain < tol * max(1.0, abs(current)):
            break
    return PlattParams(float(theta[0]), float(theta[1]))


def platt_apply(params: PlattParams, score):
    """Calibrated class-1 probability; accepts scalars or arrays of scores."""
    out = expit(params.a * _platt_feature(score) + params.b)
    return float(out) if np.ndim(out) == 0 else out


def platt_apply_predictions(params: PlattParams, predictions) -> np.ndarray:
    s = platt_apply(params, np.asarray(predictions)[:, 1])
    return np.column_stack([1.0 - s, s])
