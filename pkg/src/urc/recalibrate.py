"""Known-bias correction of predictions, plus the end-to-end global and
per-group unsupervised recalibration drivers."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    ConfusionMatrix,
    LabeledPredictionSet,
    Partition,
    UnlabeledPredictionSet,
    normalize,
    require_nonempty,
)
from .errors import AllZero, ShapeMismatch, URCError, ZeroPriorCoordinate
from .partition import (
    DEFAULT_CELLS,
    DEFAULT_SMOOTHING,
    build_equal_mass_partition,
    estimate_confusion_matrix,
    histogram,
)
from .prevalence import MapConfig, Method, PrevalenceEstimate, map_estimate


@dataclass(frozen=True, eq=False)
class DevSummary:
    """Everything recalibration needs from the development phase."""

    partition: Partition
    m_a: ConfusionMatrix
    dev_prior: np.ndarray
    smoothing: float = DEFAULT_SMOOTHING
    n_samples: Optional[int] = None

    def __post_init__(self):
        if self.partition.n_cells != self.m_a.n_cells:
            raise ShapeMismatch("partition and confusion matrix disagree on the cell count")
        prior = normalize(self.dev_prior)
        if prior.size != self.m_a.n_classes:
            raise ShapeMismatch("dev prior and confusion matrix disagree on the class count")
        object.__setattr__(self, "dev_prior", prior)


@dataclass(frozen=True, eq=False)
class RecalibrationResult:
    estimate: Optional[PrevalenceEstimate]
    recalibrated: Optional[UnlabeledPredictionSet]
    group_id: Optional[str] = None
    error: Optional[URCError] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _check_ratio_inputs(dev_prior: np.ndarray, app_prior: np.ndarray, n: int) -> None:
    if dev_prior.shape != (n,) or app_prior.shape != (n,):
        raise ShapeMismatch("prediction and priors differ in length")
    if np.any(dev_prior <= 0):
        raise ZeroPriorCoordinate("development prior must be strictly positive")


def recalibrate_predictions(predictions, dev_prior, app_prior) -> np.ndarray:
    """Row-wise version of :func:`recalibrate_prediction` on an array."""
    P = np.asarray(predictions, dtype=float)
    dev_prior = np.asarray(dev_prior, dtype=float)
    app_prior = np.asarray(app_prior, dtype=float)
    _check_ratio_inputs(dev_prior, app_prior, P.shape[-1])
    weighted = P * (app_prior / dev_prior)
    totals = weighted.sum(axis=-1, keepdims=True)
    if np.any(totals <= 0):
        raise AllZero("prediction has no mass where the target prior is positive")
    return weighted / totals


def recalibrate_prediction(c, dev_prior, app_prior) -> np.ndarray:
    """Re-weight a calibrated prediction from the development to the field prior.

    Each class probability is multiplied by ``app_prior / dev_prior`` and the
    result renormalized. This is exact when the classifier is calibrated on the
    development distribution and only class frequencies differ in the field.
    """
    c = np.asarray(c, dtype=float)
    dev_prior = np.asarray(dev_prior, dtype=float)
    app_prior = np.asarray(app_prior, dtype=float)
    _check_ratio_inputs(dev_prior, app_prior, c.size)
    return normalize(c * (app_prior / dev_prior))


def empirical_prior(labels, n_classes: int, smoothing: float = DEFAULT_SMOOTHING) -> np.ndarray:
    counts = np.bincount(np.asarray(labels, dtype=int), minlength=n_classes).astype(float)
    return normalize(counts + smoothing)


def build_dev_summary(dev: LabeledPredictionSet, m: int = DEFAULT_CELLS,
                      smoothing: float = DEFAULT_SMOOTHING) -> DevSummary:
    partition = build_equal_mass_partition(dev.scores, m)
    m_a = estimate_confusion_matrix(partition, dev, smoothing)
    prior = empirical_prior(dev.labels, dev.n_classes, smoothing)
    return DevSummary(partition, m_a, prior, smoothing, len(dev))


def _with_prior(config: MapConfig, prior: np.ndarray) -> MapConfig:
    return dataclasses.replace(config, loss=dataclasses.replace(config.loss, prior=prior))


def global_urc(summary: DevSummary, field: UnlabeledPredictionSet,
               config: MapConfig = MapConfig(), group_id: Optional[str] = None) -> RecalibrationResult:
    """Estimate the field class distribution from the cell histogram and
    re-weight every prediction accordingly."""
    require_nonempty(len(field), "field set")
    hist = histogram(summary.partition, field)
    estimate = map_estimate(hist, summary.m_a, _with_prior(config, summary.dev_prior))
    new = recalibrate_predictions(field.predictions, summary.dev_prior, estimate.p)
    return RecalibrationResult(
        estimate,
        UnlabeledPredictionSet(new, field.sample_ids, field.group_ids),
        group_id,
    )


def local_urc(summary: DevSummary, field: UnlabeledPredictionSet, config: MapConfig = MapConfig(),
              groups: Optional[Sequence[str]] = None, min_group_size: int = 1) -> list:
    """Run :func:`global_urc` separately for every group.

    ``groups`` defaults to the group ids present in ``field``; results come back
    in lexicographic group order. A failing group yields a result with
    ``error`` set instead of aborting the others. Groups smaller than
    ``min_group_size`` keep the development prior without optimization.
    """
    if any(g is None for g in field.group_ids):
        raise ShapeMismatch("every sample needs a group id for local recalibration")
    names = sorted(set(groups)) if groups is not None else field.group_names()
    results = []
    for name in names:
        part = field.select_group(name)
        try:
            if 0 < len(part) < min_group_size:
                results.append(RecalibrationResult(
                    PrevalenceEstimate(summary.dev_prior, Method.MAP, iterations_used=0,
                                       converged=True, diagnostics={"short_circuit": True}),
                    part, name))
            else:
                results.append(global_urc(summary, part, config, group_id=name))
        except URCError as exc:
            results.append(RecalibrationResult(None, None, name, exc))
    return results
