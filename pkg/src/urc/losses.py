"""Losses for MAP estimation of the field class distribution.

The data term is the multinomial negative log-likelihood of the observed cell
histogram under the cell distribution ``p @ M``; regularizers pull the
estimate toward a reference prior (KL) and, for ordered classes, toward smooth
neighbouring masses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gammaln, xlogy

from .core import CellHistogram, ConfusionMatrix, as_probability_vector
from .errors import CountMismatch, InvalidConfig, ShapeMismatch, ZeroPriorCoordinate

#: Stand-in for log(0); any candidate producing it loses every line search.
LOG_ZERO = -1e300


@dataclass(frozen=True)
class LossConfig:
    """Regularization weights and the reference distribution for the KL term.

    ``prior`` may be left as ``None`` when a caller (e.g. the recalibration
    driver) fills it in from development data.
    """

    kl_weight: float = 1.0
    continuity_weight: float = 0.0
    prior: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kl_weight < 0 or self.continuity_weight < 0:
            raise InvalidConfig("regularization weights must be non-negative")
        if self.prior is not None:
            object.__setattr__(self, "prior", as_probability_vector(self.prior))


def multinomial_log_mass(total: int, counts, probs) -> float:
    """Log of the multinomial probability of ``counts``, coefficient included.

    Returns :data:`LOG_ZERO` when a cell with positive count has zero probability.
    """
    k = np.asarray(counts)
    q = np.asarray(probs, dtype=float)
    if k.shape != q.shape or k.ndim != 1:
        raise ShapeMismatch(f"counts {k.shape} and probs {q.shape} differ")
    if np.any(k < 0):
        raise CountMismatch("counts must be non-negative")
    if int(k.sum()) != int(total):
        raise CountMismatch(f"counts sum to {int(k.sum())}, total is {total}")
    if np.any((q <= 0) & (k > 0)):
        return LOG_ZERO
    k = k.astype(float)
    return float(gammaln(total + 1.0) - gammaln(k + 1.0).sum() + xlogy(k, q).sum())


def _check_shapes(hist: CellHistogram, m_a: ConfusionMatrix, p: np.ndarray) -> None:
    if hist.n_cells != m_a.n_cells:
        raise ShapeMismatch(f"histogram has {hist.n_cells} cells, confusion matrix {m_a.n_cells}")
    if p.shape != (m_a.n_classes,):
        raise ShapeMismatch(f"class vector of length {p.size} for {m_a.n_classes} classes")


def nll_loss(hist: CellHistogram, m_a: ConfusionMatrix, p) -> float:
    p = np.asarray(p, dtype=float)
    _check_shapes(hist, m_a, p)
    if hist.total == 0:
        return 0.0
    return -multinomial_log_mass(hist.total, hist.counts, p @ m_a.entries)


def _check_prior(prior: np.ndarray) -> None:
    if np.any(prior <= 0):
        raise ZeroPriorCoordinate(f"KL reference prior has a zero coordinate: {prior.tolist()}")


def kl_regularizer(p, prior, weight: float) -> float:
    """``weight * KL(p || prior)``, with ``0 log 0 = 0``."""
    if weight < 0:
        raise InvalidConfig("weight must be non-negative")
    p = np.asarray(p, dtype=float)
    prior = np.asarray(prior, dtype=float)
    if p.shape != prior.shape:
        raise ShapeMismatch("p and prior differ in length")
    _check_prior(prior)
    return float(weight * (xlogy(p, p) - xlogy(p, prior)).sum())


def continuity_regularizer(p, weight: float) -> float:
    """``weight`` times the sum of squared differences of adjacent entries."""
    if weight < 0:
        raise InvalidConfig("weight must be non-negative")
    d = np.diff(np.asarray(p, dtype=float))
    return float(weight * (d @ d))


def combined_loss_and_gradient(hist: CellHistogram, m_a: ConfusionMatrix, p, config: LossConfig):
    """Total loss and its gradient with respect to the raw class vector ``p``.

    ``p`` must be strictly positive for the gradient to be finite. The loss is
    treated as a function on the positive orthant, so the gradient is not
    projected onto the simplex; the optimizer does its own chain rule.
    """
    p = np.asarray(p, dtype=float)
    _check_shapes(hist, m_a, p)
    value = 0.0
    grad = np.zeros_like(p)

    if hist.total > 0:
        q = p @ m_a.entries
        value += -multinomial_log_mass(hist.total, hist.counts, q)
        k = hist.counts.astype(float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(k > 0, k / q, 0.0)
        grad -= m_a.entries @ ratio

    if config.kl_weight > 0:
        if config.prior is None:
            raise InvalidConfig("kl_weight > 0 needs a reference prior")
        _check_prior(config.prior)
        value += kl_regularizer(p, config.prior, config.kl_weight)
        with np.errstate(divide="ignore"):
            grad += config.kl_weight * (np.log(p) - np.log(config.prior) + 1.0)

    if config.continuity_weight > 0:
        value += continuity_regularizer(p, config.continuity_weight)
        d = np.diff(p)
        grad[:-1] -= 2.0 * config.continuity_weight * d
        grad[1:] += 2.0 * config.continuity_weight * d

    return value, grad


def combined_loss(hist: CellHistogram, m_a: ConfusionMatrix, p, config: LossConfig) -> float:
    """Value-only version of :func:`combined_loss_and_gradient`; also accepts
    boundary points of the simplex."""
    p = np.asarray(p, dtype=float)
    value = nll_loss(hist, m_a, p)
    if config.kl_weight > 0:
        if config.prior is None:
            raise InvalidConfig("kl_weight > 0 needs a reference prior")
        value += kl_regularizer(p, config.prior, config.kl_weight)
    if config.continuity_weight > 0:
        value += continuity_regularizer(p, config.continuity_weight)
    return value
