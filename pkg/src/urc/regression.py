"""Recalibration of sample-based regression predictions.

A predictive distribution is discretized onto a grid of target intervals,
which turns the regressor into a classifier over ordered classes. The interval
masses are recalibrated like class probabilities; the shape of the samples
inside each interval is kept as-is.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import CellHistogram, ConfusionMatrix, normalize
from .errors import DegenerateGrid, EmptySample, InvalidConfig, LengthMismatch
from .losses import LossConfig
from .partition import DEFAULT_SMOOTHING, confusion_from_cells, order_statistic_cuts
from .prevalence import MapConfig, PrevalenceEstimate, map_estimate
from .recalibrate import _with_prior, empirical_prior, recalibrate_prediction

DEFAULT_CONTINUITY_WEIGHT = 0.1


@dataclass(frozen=True)
class IntervalGrid:
    """Interval ``i`` is ``(edges[i], edges[i + 1]]``; outer edges are infinite."""

    edges: tuple

    def __post_init__(self):
        e = tuple(float(x) for x in self.edges)
        if len(e) < 3:
            raise DegenerateGrid("need at least two intervals")
        if any(b <= a for a, b in zip(e, e[1:])):
            raise DegenerateGrid(f"edges not strictly increasing: {e}")
        object.__setattr__(self, "edges", e)

    @property
    def n_intervals(self) -> int:
        return len(self.edges) - 1

    @property
    def interior(self) -> np.ndarray:
        return np.asarray(self.edges[1:-1])

    def interval_of(self, values) -> np.ndarray:
        return np.searchsorted(self.interior, np.asarray(values, dtype=float), side="left")


def build_quantile_grid(dev_point_predictions, n: int) -> IntervalGrid:
    """Interior edges at the empirical ``i/n`` quantiles (order statistics, no
    interpolation) of the development point predictions."""
    if n < 2:
        raise DegenerateGrid("need at least two intervals")
    values = np.asarray(dev_point_predictions, dtype=float).ravel()
    cuts = order_statistic_cuts(values, n)
    if np.any(np.diff(cuts) <= 0):
        raise DegenerateGrid(f"quantile edges coincide for n={n}")
    grid = IntervalGrid((-np.inf, *cuts.tolist(), np.inf))
    if np.bincount(grid.interval_of(values), minlength=n).min() == 0:
        raise DegenerateGrid("an interval receives no development values")
    return grid


@dataclass(frozen=True, eq=False)
class DiscretizedPrediction:
    masses: np.ndarray
    within: tuple  # per-interval arrays of the samples that fell there


def discretize(prediction_samples, grid: IntervalGrid, smoothing: float = 0.0) -> DiscretizedPrediction:
    """Interval masses of a sample-based predictive distribution.

    With ``smoothing > 0`` every interval gets pseudo-count ``smoothing``, so
    masses can be positive where ``within`` is empty.
    """
    s = np.asarray(prediction_samples, dtype=float).ravel()
    if s.size == 0:
        raise EmptySample("no predictive samples")
    if smoothing < 0:
        raise InvalidConfig("smoothing must be non-negative")
    idx = grid.interval_of(s)
    counts = np.bincount(idx, minlength=grid.n_intervals).astype(float)
    within = tuple(s[idx == i] for i in range(grid.n_intervals))
    return DiscretizedPrediction(normalize(counts + smoothing), within)


def recalibrate_distribution(d: DiscretizedPrediction, dev_prior, app_prior) -> DiscretizedPrediction:
    return DiscretizedPrediction(recalibrate_prediction(d.masses, dev_prior, app_prior), d.within)


@dataclass(frozen=True, eq=False)
class RegressionResult:
    grid: IntervalGrid
    m_a: ConfusionMatrix
    dev_prior: np.ndarray
    estimate: PrevalenceEstimate
    field_cells: np.ndarray
    original: list
    recalibrated: list


def default_regression_config() -> MapConfig:
    return MapConfig(LossConfig(kl_weight=1.0, continuity_weight=DEFAULT_CONTINUITY_WEIGHT))


def regression_urc(dev_points, dev_targets, field_samples: Sequence, n: int,
                   config: Optional[MapConfig] = None, smoothing: float = DEFAULT_SMOOTHING,
                   field_points=None, discretize_smoothing: float = 0.0) -> RegressionResult:
    """Estimate how field targets distribute over dev-quantile intervals and
    recalibrate each field predictive distribution.

    The grid comes from the development point predictions. Development targets
    give the interval "labels" and development point predictions the cells, so
    the confusion matrix is square. A field sample's cell is the interval of
    its point prediction, by default the mean of its predictive samples.
    """
    config = default_regression_config() if config is None else config
    points = np.asarray(dev_points, dtype=float).ravel()
    targets = np.asarray(dev_targets, dtype=float).ravel()
    if points.size != targets.size:
        raise LengthMismatch("dev point predictions and targets differ in length")
    if len(field_samples) == 0:
        raise EmptySample("no field predictions")
    grid = build_quantile_grid(points, n)
    labels = grid.interval_of(targets)
    m_a = confusion_from_cells(grid.interval_of(points), labels, n, n, smoothing)
    dev_prior = empirical_prior(labels, n, smoothing)

    if field_points is None:
        field_points = [np.mean(np.asarray(s, dtype=float)) for s in field_samples]
    field_points = np.asarray(field_points, dtype=float)
    if field_points.size != len(field_samples):
        raise LengthMismatch("field point predictions and sample sets differ in length")
    cells = grid.interval_of(field_points)
    hist = CellHistogram(np.bincount(cells, minlength=n))
    estimate = map_estimate(hist, m_a, _with_prior(config, dev_prior))

    original = [discretize(s, grid, discretize_smoothing) for s in field_samples]
    recalibrated = [recalibrate_distribution(d, dev_prior, estimate.p) for d in original]
    return RegressionResult(grid, m_a, dev_prior, estimate, cells, original, recalibrated)
