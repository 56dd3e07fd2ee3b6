"""Reference quantifiers: Classify and Count, Adjusted Classify and Count, and
EM re-estimation of the class prior."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfusionMatrix, LabeledPredictionSet, UnlabeledPredictionSet, hard_labels, normalize, require_nonempty
from .errors import InvalidConfig, ZeroPriorCoordinate
from .partition import DEFAULT_SMOOTHING, confusion_from_cells
from .prevalence import Method, PrevalenceEstimate, solve_clipped

#: ``entries[i, k]`` = P(argmax prediction = k | true class i); a square
#: :class:`ConfusionMatrix` whose "cells" are the predicted classes.
HardConfusion = ConfusionMatrix


@dataclass(frozen=True)
class EmConfig:
    max_iterations: int = 3000
    tolerance: float = 1e-10

    def __post_init__(self):
        if self.max_iterations < 1 or not self.tolerance > 0:
            raise InvalidConfig("EM iteration limit and tolerance must be positive")


def cc_vector(predictions) -> np.ndarray:
    P = np.asarray(predictions)
    return np.bincount(hard_labels(P), minlength=P.shape[1]) / P.shape[0]


def classify_and_count(field: UnlabeledPredictionSet) -> PrevalenceEstimate:
    require_nonempty(len(field), "field set")
    return PrevalenceEstimate(cc_vector(field.predictions), Method.CC)


def estimate_hard_confusion(validation: LabeledPredictionSet,
                            smoothing: float = DEFAULT_SMOOTHING) -> HardConfusion:
    n = validation.n_classes
    return confusion_from_cells(hard_labels(validation.predictions), validation.labels, n, n, smoothing)


def acc_from_rates(cc, hard_conf: HardConfusion) -> PrevalenceEstimate:
    """Correct a classify-and-count vector by inverting the hard confusion matrix.

    Binary case: ``p1 = (cc - fpr) / (tpr - fpr)``, clipped to [0, 1].
    """
    return solve_clipped(hard_conf.entries.T, np.asarray(cc, dtype=float), Method.ACC)


def adjusted_classify_and_count(field: UnlabeledPredictionSet, hard_conf: HardConfusion) -> PrevalenceEstimate:
    require_nonempty(len(field), "field set")
    return acc_from_rates(cc_vector(field.predictions), hard_conf)


def em_log_likelihood(predictions, dev_prior, p) -> float:
    """Field log-likelihood of prior ``p`` up to a constant:
    ``sum_s log(sum_i c_i(s) p_i / dev_prior_i)``."""
    w = np.asarray(p, dtype=float) / np.asarray(dev_prior, dtype=float)
    with np.errstate(divide="ignore"):
        return float(np.log(np.asarray(predictions) @ w).sum())


def expectation_maximization(field: UnlabeledPredictionSet, dev_prior, start=None,
                             config: EmConfig = EmConfig(), trace: list = None) -> PrevalenceEstimate:
    """Fixed-point iteration of the prior re-estimate.

    Each step re-weights every prediction by ``p / dev_prior`` (E-step) and sets
    ``p`` to the mean re-weighted prediction (M-step). ``trace``, if given,
    receives the log-likelihood of every iterate including the start.
    """
    require_nonempty(len(field), "field set")
    dev_prior = normalize(dev_prior)
    if np.any(dev_prior <= 0):
        raise ZeroPriorCoordinate("development prior must be strictly positive")
    P = field.predictions
    p = dev_prior.copy() if start is None else np.array(normalize(start))
    if trace is not None:
        trace.append(em_log_likelihood(P, dev_prior, p))
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        weighted = P * (p / dev_prior)
        posteriors = weighted / weighted.sum(axis=1, keepdims=True)
        p_new = posteriors.mean(axis=0)
        p_new /= p_new.sum()
        change = float(np.abs(p_new - p).max())
        p = p_new
        if trace is not None:
            trace.append(em_log_likelihood(P, dev_prior, p))
        if change < config.tolerance:
            converged = True
            break
    return PrevalenceEstimate(
        p, Method.EM, final_loss=-em_log_likelihood(P, dev_prior, p),
        iterations_used=iterations, converged=converged,
    )
