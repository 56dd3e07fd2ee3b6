"""Experiment drivers: the quantifier comparison on synthetic data and the
per-group recalibration sweep."""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..baselines import (
    EmConfig,
    adjusted_classify_and_count,
    classify_and_count,
    estimate_hard_confusion,
    expectation_maximization,
)
from ..core import LabeledPredictionSet, RngStream, UnlabeledPredictionSet
from ..errors import InvalidConfig, URCError
from ..metrics import accuracy_and_precision, brier_decomposition, platt_apply_predictions, platt_fit
from ..partition import DEFAULT_SMOOTHING
from ..prevalence import MapConfig
from ..recalibrate import build_dev_summary, global_urc, local_urc
from ..synthdata import make_population, positive_count, predict, train_logistic

METHODS = ("cc", "acc", "em", "urc")


class Experiment(str, enum.Enum):
    BALANCED_TRAINING = "balanced_training"
    BALANCED_TEST = "balanced_test"


#: (train prevalence, test prevalence) for each named experiment.
PREVALENCES = {
    Experiment.BALANCED_TRAINING: (0.5, 0.05),
    Experiment.BALANCED_TEST: (0.05, 0.5),
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: Experiment = Experiment.BALANCED_TRAINING
    test_sizes: tuple = (50, 100, 500, 1000, 3000)
    replicas: int = 30
    train_size: int = 2000
    validation_size: int = 2000
    train_prevalence: Optional[float] = None
    test_prevalence: Optional[float] = None
    seed: int = 0
    urc_cells: int = 2
    smoothing: float = DEFAULT_SMOOTHING
    class_sep: float = 0.4
    flip_y: float = 0.1
    map_config: MapConfig = field(default_factory=MapConfig)
    em_config: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        object.__setattr__(self, "experiment", Experiment(self.experiment))
        train, test = PREVALENCES[self.experiment]
        if self.train_prevalence is None:
            object.__setattr__(self, "train_prevalence", train)
        if self.test_prevalence is None:
            object.__setattr__(self, "test_prevalence", test)
        object.__setattr__(self, "test_sizes", tuple(int(s) for s in self.test_sizes))
        if not self.test_sizes or min(self.test_sizes) < 1:
            raise InvalidConfig("test sizes must be positive")
        if self.replicas < 1 or self.train_size < 2 or self.validation_size < 2:
            raise InvalidConfig("replicas and split sizes must be positive")
        for prev in (self.train_prevalence, self.test_prevalence):
            if not 0 < prev < 1:
                raise InvalidConfig("prevalences must lie in (0, 1)")


@dataclass(frozen=True)
class ResultRow:
    method: str
    test_size: int
    replica: int
    estimated_prevalence: float
    true_prevalence: float
    abs_error: float
    converged: bool

    @classmethod
    def of(cls, method, size, replica, estimate, truth, converged):
        return cls(method, size, replica, float(estimate), float(truth), abs(float(estimate) - float(truth)), bool(converged))


def _failed_rows(size, replica, truth):
    return [ResultRow(m, size, replica, float("nan"), truth, float("nan"), False) for m in METHODS]


def run_replica(config: ExperimentConfig, size: int, replica: int) -> list:
    """One replica at one test size: fresh data, fresh classifier, four quantifiers."""
    stream = RngStream(config.seed).substream(size, replica)
    g = stream.generator()
    truth = positive_count(size, config.test_prevalence) / size
    try:
        pop = make_population(class_sep=config.class_sep, flip_y=config.flip_y, rng=g)
        train = pop.sample(config.train_size, config.train_prevalence, g)
        valid = pop.sample(config.validation_size, config.train_prevalence, g)
        test = pop.sample(size, config.test_prevalence, g)
        model = train_logistic(train)
        dev = LabeledPredictionSet(predict(model, valid.features), labels=valid.labels)
        field_set = UnlabeledPredictionSet(predict(model, test.features))

        hard = estimate_hard_confusion(dev, config.smoothing)
        summary = build_dev_summary(dev, config.urc_cells, config.smoothing)
        train_prior = np.array([1 - train.prevalence, train.prevalence])

        estimates = {
            "cc": classify_and_count(field_set),
            "acc": adjusted_classify_and_count(field_set, hard),
            "em": expectation_maximization(field_set, train_prior, train_prior, config.em_config),
            "urc": global_urc(summary, field_set, config.map_config).estimate,
        }
    except URCError:
        return _failed_rows(size, replica, truth)
    return [ResultRow.of(m, size, replica, estimates[m].p[1], truth, estimates[m].converged) for m in METHODS]


def run_quantification_experiment(config: ExperimentConfig, workers: int = 1) -> list:
    """All (method, size, replica) rows, sorted; identical for any ``workers``."""
    tasks = [(size, r) for size in config.test_sizes for r in range(config.replicas)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda t: run_replica(config, *t), tasks))
    else:
        chunks = [run_replica(config, *t) for t in tasks]
    rows = [row for chunk in chunks for row in chunk]
    order = {m: i for i, m in enumerate(METHODS)}
    rows.sort(key=lambda r: (r.test_size, order[r.method], r.replica))
    return rows


@dataclass(frozen=True)
class SummaryRow:
    method: str
    test_size: int
    n: int
    median_estimate: float
    lower_95: float
    upper_95: float
    median_abs_error: float
    true_prevalence: float


def summarize(rows: Sequence[ResultRow]) -> list:
    """Median and central 95% range of the estimates per (method, size)."""
    out = []
    keys = sorted({(r.test_size, r.method) for r in rows}, key=lambda k: (k[0], METHODS.index(k[1]) if k[1] in METHODS else 99))
    for size, method in keys:
        sel = [r for r in rows if r.test_size == size and r.method == method and np.isfinite(r.estimated_prevalence)]
        if not sel:
            continue
        est = np.array([r.estimated_prevalence for r in sel])
        err = np.array([r.abs_error for r in sel])
        lo, hi = np.quantile(est, [0.025, 0.975])
        out.append(SummaryRow(method, size, len(sel), float(np.median(est)), float(lo), float(hi),
                              float(np.median(err)), float(np.median([r.true_prevalence for r in sel]))))
    return out


def median_error(rows: Sequence[ResultRow], method: str, size: int) -> float:
    return float(np.median([r.abs_error for r in rows if r.method == method and r.test_size == size]))


# --- local recalibration sweep ---------------------------------------------


@dataclass(frozen=True)
class LocalRow:
    base_rate: float
    group: str
    group_rate: float
    n: int
    estimated_rate: float
    brier_before: float
    brier_after: float
    calibration_before: float
    calibration_after: float
    refinement_before: float
    refinement_after: float
    accuracy_before: float
    accuracy_after: float


def run_local_experiment(base_rates: Sequence[float], n_per_group: int = 3000, seed: int = 0,
                         dev_size: int = 4000, cells: int = 4, class_sep: float = 0.4, flip_y: float = 0.1,
                         map_config: MapConfig = MapConfig()) -> list:
    """Per-group recalibration on two groups with complementary base rates.

    For each rate ``r`` group ``a`` has positive rate ``r`` and group ``b`` has
    ``1 - r``. The classifier is trained on balanced data and Platt-scaled on a
    balanced held-out split, which also serves as the development set.
    """
    rows = []
    for i, rate in enumerate(base_rates):
        if not 0 < rate < 1:
            raise InvalidConfig("base rates must lie in (0, 1)")
        g = RngStream(seed).substream(i).generator()
        pop = make_population(class_sep=class_sep, flip_y=flip_y, rng=g)
        train = pop.sample(dev_size, 0.5, g)
        calib = pop.sample(dev_size, 0.5, g)
        model = train_logistic(train)
        platt = platt_fit(predict(model, calib.features)[:, 1], calib.labels)
        dev = LabeledPredictionSet(platt_apply_predictions(platt, predict(model, calib.features)), labels=calib.labels)
        summary = build_dev_summary(dev, cells)

        rates = {"a": rate, "b": 1.0 - rate}
        preds, groups, labels = [], [], []
        for name, r in rates.items():
            data = pop.sample(n_per_group, r, g)
            preds.append(platt_apply_predictions(platt, predict(model, data.features)))
            groups += [name] * n_per_group
            labels.append(data.labels)
        P = np.vstack(preds)
        y = np.concatenate(labels)
        field_set = UnlabeledPredictionSet(P, group_ids=groups)
        for res in local_urc(summary, field_set, map_config):
            mask = np.array([gid == res.group_id for gid in groups])
            before, after = P[mask], res.recalibrated.predictions
            yg = y[mask]
            d0, d1 = brier_decomposition(before, yg), brier_decomposition(after, yg)
            rows.append(LocalRow(
                rate, res.group_id, rates[res.group_id], int(mask.sum()), float(res.estimate.p[1]),
                d0.brier, d1.brier, d0.calibration, d1.calibration, d0.refinement, d1.refinement,
                accuracy_and_precision(before, yg).accuracy, accuracy_and_precision(after, yg).accuracy,
            ))
    return rows
