"""Shared domain types: probability vectors, prediction sets, partitions,
confusion matrices, histograms, and seeded random streams.

Probability vectors are plain read-only ``float64`` numpy arrays; class and
cell indices are 0-based throughout. For binary problems the "score" of a
prediction is the probability assigned to class 1 (the positive class).

Modelling assumption
--------------------
Everything downstream assumes prior-probability shift: conditioned on the true
class, the distribution of classifier outputs is the same in development and in
the field. Nothing here can test that on real data; the synthetic generators in
:mod:`urc.synthdata` construct populations that satisfy it by design.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    AllZero,
    EmptySample,
    InvalidProbability,
    LengthMismatch,
    NegativeEntry,
    ShapeMismatch,
    DegeneratePartition,
)

ProbabilityVector = np.ndarray

#: Largest deviation of a sum from 1 that construction silently repairs.
SUM_TOLERANCE = 1e-6


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def normalize(raw: Iterable[float]) -> ProbabilityVector:
    """Scale non-negative weights so that they sum to one.

    >>> normalize([0.45, 0.15]).tolist()
    [0.75, 0.25]
    """
    x = np.array(raw, dtype=float).ravel()
    if x.size < 2:
        raise InvalidProbability(f"need at least 2 entries, got {x.size}")
    if np.any(np.isnan(x)):
        raise InvalidProbability("NaN entry")
    if np.any(x < 0):
        raise NegativeEntry(f"negative entry in {x.tolist()}")
    total = x.sum()
    if total <= 0:
        raise AllZero("every entry is zero")
    if not np.isfinite(total):
        raise InvalidProbability("non-finite entry")
    return _readonly(_unit_scale(x, total))


def _unit_scale(x: np.ndarray, total: float) -> np.ndarray:
    """``x / total``, except that a vector already summing to 1 up to rounding
    is returned unchanged; this makes normalizing twice the identity."""
    if abs(total - 1.0) <= 4 * x.size * np.finfo(float).eps:
        return x
    return x / total


def as_probability_vector(values: Iterable[float], tol: float = SUM_TOLERANCE) -> ProbabilityVector:
    """Validate ``values`` as a point on the simplex.

    Sums within ``tol`` of one are renormalized; anything further off is rejected
    rather than silently rescaled.
    """
    x = np.array(values, dtype=float).ravel()
    if x.size < 2:
        raise InvalidProbability(f"need at least 2 entries, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InvalidProbability("non-finite entry")
    if np.any(x < 0) or np.any(x > 1):
        raise InvalidProbability(f"entries outside [0, 1]: {x.tolist()}")
    total = x.sum()
    if abs(total - 1.0) > tol:
        raise InvalidProbability(f"entries sum to {total!r}, not 1")
    return _readonly(_unit_scale(x, total))


def argmax_class(p: Sequence[float]) -> int:
    """Index of the largest entry; ties go to the lowest index."""
    # np.argmax already returns the first maximal index
    return int(np.argmax(np.asarray(p)))


def hard_labels(predictions: np.ndarray) -> np.ndarray:
    """Row-wise :func:`argmax_class`."""
    return np.argmax(np.asarray(predictions), axis=1)


def _validate_prediction_matrix(predictions, tol: float = SUM_TOLERANCE) -> np.ndarray:
    P = np.array(predictions, dtype=float)
    if P.ndim == 1 and P.size == 0:
        raise ShapeMismatch("cannot infer class count from an empty 1-d array")
    if P.ndim != 2:
        raise ShapeMismatch(f"predictions must be 2-d (samples x classes), got shape {P.shape}")
    if P.shape[1] < 2:
        raise ShapeMismatch("predictions need at least 2 classes")
    if P.shape[0] == 0:
        return _readonly(P)
    if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
        raise InvalidProbability("prediction entries must lie in [0, 1]")
    sums = P.sum(axis=1)
    bad = np.abs(sums - 1.0) > tol
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InvalidProbability(f"prediction row {i} sums to {sums[i]!r}")
    return _readonly(P / sums[:, None])


def _default_ids(n: int) -> tuple:
    return tuple(str(i) for i in range(n))


@dataclass(frozen=True, eq=False)
class UnlabeledPredictionSet:
    """Field-phase predictions, one row per sample.

    ``group_ids`` entries are ``None`` for ungrouped samples.
    """

    predictions: np.ndarray
    sample_ids: tuple = None
    group_ids: tuple = None

    def __post_init__(self):
        P = _validate_prediction_matrix(self.predictions)
        object.__setattr__(self, "predictions", P)
        n = P.shape[0]
        ids = _default_ids(n) if self.sample_ids is None else tuple(str(s) for s in self.sample_ids)
        groups = (None,) * n if self.group_ids is None else tuple(
            None if g is None or g == "" else str(g) for g in self.group_ids
        )
        if len(ids) != n or len(groups) != n:
            raise LengthMismatch("sample_ids/group_ids length differs from predictions")
        object.__setattr__(self, "sample_ids", ids)
        object.__setattr__(self, "group_ids", groups)

    def __len__(self) -> int:
        return self.predictions.shape[0]

    @property
    def n_classes(self) -> int:
        return self.predictions.shape[1]

    @property
    def scores(self) -> np.ndarray:
        """Class-1 probability of each sample (binary sets only)."""
        if self.n_classes != 2:
            raise ShapeMismatch("scores are defined for binary predictions only")
        return self.predictions[:, 1]

    def take(self, indices) -> "UnlabeledPredictionSet":
        idx = np.asarray(indices, dtype=int)
        return UnlabeledPredictionSet(
            self.predictions[idx],
            tuple(self.sample_ids[i] for i in idx),
            tuple(self.group_ids[i] for i in idx),
        )

    def group_names(self) -> list:
        """Distinct non-empty group ids in lexicographic order."""
        return sorted({g for g in self.group_ids if g is not None})

    def select_group(self, group: str) -> "UnlabeledPredictionSet":
        return self.take([i for i, g in enumerate(self.group_ids) if g == group])


@dataclass(frozen=True, eq=False)
class LabeledPredictionSet(UnlabeledPredictionSet):
    """Development-phase predictions together with their true class indices."""

    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        super().__post_init__()
        if self.labels is None:
            raise LengthMismatch("labels are required")
        y = np.asarray(self.labels)
        if y.shape != (len(self),):
            raise LengthMismatch(f"{y.size} labels for {len(self)} predictions")
        if y.size and (not np.issubdtype(y.dtype, np.integer)):
            if not np.all(np.equal(np.mod(y, 1), 0)):
                raise InvalidProbability("labels must be integer class indices")
        y = y.astype(int)
        if y.size and (y.min() < 0 or y.max() >= self.n_classes):
            raise InvalidProbability(f"labels must lie in 0..{self.n_classes - 1}")
        object.__setattr__(self, "labels", _readonly(y))

    def take(self, indices) -> "LabeledPredictionSet":
        idx = np.asarray(indices, dtype=int)
        return LabeledPredictionSet(
            self.predictions[idx],
            tuple(self.sample_ids[i] for i in idx),
            tuple(self.group_ids[i] for i in idx),
            labels=self.labels[idx],
        )

    def unlabeled(self) -> UnlabeledPredictionSet:
        return UnlabeledPredictionSet(self.predictions, self.sample_ids, self.group_ids)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)


@dataclass(frozen=True)
class Partition:
    """Right-closed intervals of the binary class-1 score.

    Cell ``j`` holds scores ``s`` with ``cutpoints[j-1] < s <= cutpoints[j]``;
    the first cell is unbounded below and the last unbounded above, so a score
    equal to a cutpoint belongs to the lower cell.
    """

    cutpoints: tuple = ()

    def __post_init__(self):
        c = tuple(float(x) for x in self.cutpoints)
        if any(not np.isfinite(x) for x in c):
            raise DegeneratePartition("cutpoints must be finite")
        if any(b <= a for a, b in zip(c, c[1:])):
            raise DegeneratePartition(f"cutpoints not strictly increasing: {c}")
        if c and (c[0] < 0.0 or c[-1] >= 1.0):
            raise DegeneratePartition(f"cutpoints must lie in [0, 1): {c}")
        object.__setattr__(self, "cutpoints", c)

    @property
    def n_cells(self) -> int:
        return len(self.cutpoints) + 1

    def cells_of_scores(self, scores) -> np.ndarray:
        return np.searchsorted(np.asarray(self.cutpoints), np.asarray(scores, dtype=float), side="left")


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``entries[i, j]`` is the development probability of landing in cell ``j``
    given true class ``i``. Rows are classes, columns are cells."""

    entries: np.ndarray
    class_counts: np.ndarray = None

    def __post_init__(self):
        M = np.array(self.entries, dtype=float)
        if M.ndim != 2 or M.shape[0] < 2 or M.shape[1] < 1:
            raise ShapeMismatch(f"confusion matrix must be classes x cells, got {M.shape}")
        if not np.all(np.isfinite(M)) or np.any(M < 0) or np.any(M > 1):
            raise InvalidProbability("confusion entries must lie in [0, 1]")
        rows = M.sum(axis=1)
        if np.any(np.abs(rows - 1.0) > 1e-9):
            raise InvalidProbability(f"confusion rows must sum to 1, got {rows.tolist()}")
        object.__setattr__(self, "entries", _readonly(M))
        if self.class_counts is not None:
            counts = np.asarray(self.class_counts, dtype=int)
            if counts.shape != (M.shape[0],):
                raise ShapeMismatch("class_counts length must equal the number of classes")
            object.__setattr__(self, "class_counts", _readonly(counts))

    @property
    def n_classes(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cells(self) -> int:
        return self.entries.shape[1]

    def cell_distribution(self, p) -> np.ndarray:
        """Field cell probabilities implied by class distribution ``p``."""
        return np.asarray(p, dtype=float) @ self.entries


@dataclass(frozen=True, eq=False)
class CellHistogram:
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size < 1:
            raise ShapeMismatch("histogram counts must be a non-empty 1-d sequence")
        if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise NegativeEntry("histogram counts must be non-negative integers")
        object.__setattr__(self, "counts", _readonly(c.astype(np.int64)))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_cells(self) -> int:
        return self.counts.size


@dataclass(frozen=True)
class RngStream:
    """Seeded, stream-addressable source of randomness.

    Draws depend only on ``(seed, stream_id)``: numpy's PCG64 bit generator is
    platform independent, and the stream id enters through the seed sequence's
    spawn key, so parallel replicas never share or shift each other's draws.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        mask = (1 << 64) - 1
        ss = np.random.SeedSequence(entropy=int(self.seed) & mask, spawn_key=(int(self.stream_id) & mask,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, *keys: int) -> "RngStream":
        """Derived stream, deterministic in ``keys``; distinct keys give distinct streams."""
        mask = (1 << 64) - 1
        ss = np.random.SeedSequence(entropy=int(self.seed) & mask, spawn_key=(int(self.stream_id) & mask, *keys))
        return RngStream(self.seed, int(ss.generate_state(1, np.uint64)[0]))


def require_nonempty(n: int, what: str = "sample") -> None:
    if n == 0:
        raise EmptySample(f"empty {what}")

