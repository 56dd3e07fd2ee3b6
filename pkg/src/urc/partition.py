"""Equal-mass partitions of the class-1 score and the counts derived from them."""

from __future__ import annotations

import math

import numpy as np

from .core import (
    CellHistogram,
    ConfusionMatrix,
    LabeledPredictionSet,
    Partition,
    UnlabeledPredictionSet,
)
from .errors import DegeneratePartition, EmptySample, InvalidConfig, MissingClass, ShapeMismatch

#: Additive smoothing applied to confusion-matrix and prior estimates.
DEFAULT_SMOOTHING = 0.5
DEFAULT_CELLS = 4


def order_statistic_cuts(values, m: int) -> np.ndarray:
    """The ``ceil(i*N/m)``-th order statistics of ``values`` for ``i = 1..m-1``.

    No interpolation: every cut is one of the observed values.
    """
    v = np.sort(np.asarray(values, dtype=float).ravel())
    N = v.size
    if N == 0:
        raise EmptySample("no values to take quantiles of")
    if m < 1:
        raise InvalidConfig(f"need at least one cell, got m={m}")
    ranks = [math.ceil(i * N / m) for i in range(1, m)]
    return v[[r - 1 for r in ranks]]


def build_equal_mass_partition(dev_scores, m: int) -> Partition:
    """Cut the development class-1 scores into ``m`` cells of (nearly) equal mass."""
    cuts = order_statistic_cuts(dev_scores, m)
    if np.any(np.diff(cuts) <= 0):
        raise DegeneratePartition(f"quantile cuts coincide for m={m}: too few distinct scores")
    return Partition(tuple(cuts.tolist()))


def _scores_of(predictions) -> np.ndarray:
    P = np.asarray(predictions, dtype=float)
    if P.ndim == 1:
        if P.size != 2:
            raise ShapeMismatch("partitions apply to binary predictions only")
        return P[1:2]
    if P.shape[1] != 2:
        raise ShapeMismatch("partitions apply to binary predictions only")
    return P[:, 1]


def assign_cell(partition: Partition, prediction) -> int:
    """Cell index of a single binary prediction."""
    return int(partition.cells_of_scores(_scores_of(prediction))[0])


def assign_cells(partition: Partition, predictions) -> np.ndarray:
    return partition.cells_of_scores(_scores_of(predictions))


def histogram_from_cells(cells, n_cells: int) -> CellHistogram:
    cells = np.asarray(cells, dtype=int)
    return CellHistogram(np.bincount(cells, minlength=n_cells))


def histogram(partition: Partition, field: UnlabeledPredictionSet) -> CellHistogram:
    if len(field) == 0:
        return CellHistogram(np.zeros(partition.n_cells, dtype=np.int64))
    return histogram_from_cells(assign_cells(partition, field.predictions), partition.n_cells)


def confusion_from_cells(cells, labels, n_classes: int, n_cells: int,
                         smoothing: float = DEFAULT_SMOOTHING) -> ConfusionMatrix:
    """Estimate ``P(cell | class)`` from cell assignments and labels.

    Works for any class and cell count, so callers with their own notion of a
    cell (multiclass regions, hard predictions, regression intervals) can use it.
    """
    if smoothing < 0:
        raise InvalidConfig("smoothing must be non-negative")
    cells = np.asarray(cells, dtype=int)
    labels = np.asarray(labels, dtype=int)
    counts = np.zeros((n_classes, n_cells))
    np.add.at(counts, (labels, cells), 1.0)
    class_totals = counts.sum(axis=1)
    missing = np.flatnonzero(class_totals == 0)
    if missing.size:
        raise MissingClass(f"no development samples for class(es) {missing.tolist()}")
    M = (counts + smoothing) / (class_totals + n_cells * smoothing)[:, None]
    return ConfusionMatrix(M, class_totals.astype(int))


def estimate_confusion_matrix(partition: Partition, dev: LabeledPredictionSet,
                              smoothing: float = DEFAULT_SMOOTHING) -> ConfusionMatrix:
    cells = assign_cells(partition, dev.predictions) if len(dev) else np.zeros(0, dtype=int)
    return confusion_from_cells(cells, dev.labels, dev.n_classes, partition.n_cells, smoothing)


def observed_cell_frequencies(hist: CellHistogram) -> np.ndarray:
    if hist.total == 0:
        raise EmptySample("histogram is empty")
    return hist.counts / hist.total
