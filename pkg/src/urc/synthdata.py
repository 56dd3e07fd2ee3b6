"""Synthetic data: a make_classification-style generator, a small logistic
regression learner, and discrete populations that are calibrated by
construction."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import LabeledPredictionSet, RngStream, UnlabeledPredictionSet, as_probability_vector
from .errors import InconsistentSpec, InvalidConfig, ShapeMismatch, SingleClass


@dataclass(frozen=True)
class GeneratorConfig:
    n_samples: int
    prevalence: float
    n_features: int = 4
    n_informative: int = 2
    class_sep: float = 0.4
    flip_y: float = 0.1
    rng: RngStream = field(default_factory=lambda: RngStream(0))

    def __post_init__(self):
        if self.n_samples < 2:
            raise InvalidConfig("n_samples must be at least 2")
        if not 0 < self.prevalence < 1:
            raise InvalidConfig("prevalence must lie in (0, 1)")
        k = positive_count(self.n_samples, self.prevalence)
        if not 1 <= k <= self.n_samples - 1:
            raise InvalidConfig(f"prevalence {self.prevalence} gives {k} positives of {self.n_samples}")
        if not 1 <= self.n_informative <= self.n_features:
            raise InvalidConfig("need 1 <= n_informative <= n_features")
        if not 0 <= self.flip_y <= 1:
            raise InvalidConfig("flip_y must lie in [0, 1]")
        if self.class_sep < 0:
            raise InvalidConfig("class_sep must be non-negative")


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.labels.size

    @property
    def prevalence(self) -> float:
        return float(np.mean(self.labels == 1))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"feature_{j + 1}" for j in range(self.features.shape[1])] + ["label"])
        for x, y in zip(self.features, self.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])
        return buf.getvalue()


def positive_count(n_samples: int, prevalence: float) -> int:
    # half-up rounding; round() would round 2.5 to 2
    return int(math.floor(prevalence * n_samples + 0.5))


@dataclass(frozen=True, eq=False)
class Population:
    """Fixed class geometry from which splits of any size and prevalence are drawn.

    Each class is a unit Gaussian around its centroid in the informative
    dimensions; the centroids sit on opposite vertices of a hypercube with
    side ``2 * class_sep``. Remaining features are pure noise. Label noise
    follows ``flip_y``: the generating cluster of a sample disagrees with its
    label with probability ``flip_y / 2`` (a flipped label is resampled uniformly
    from a balanced base population).

    Splits fix the number of positive *final* labels exactly, so class
    conditional feature distributions are identical across splits of
    different prevalence.
    """

    centroid: np.ndarray  # class-1 centroid; class 0 sits at -centroid
    n_features: int
    flip_y: float

    def sample(self, n_samples: int, prevalence: float, rng: np.random.Generator) -> Dataset:
        k = positive_count(n_samples, prevalence)
        labels = np.zeros(n_samples, dtype=int)
        labels[:k] = 1
        rng.shuffle(labels)
        disagree = rng.random(n_samples) < self.flip_y / 2
        cluster = np.where(disagree, 1 - labels, labels)
        X = rng.standard_normal((n_samples, self.n_features))
        n_inf = self.centroid.size
        X[:, :n_inf] += np.where(cluster[:, None] == 1, self.centroid, -self.centroid)
        return Dataset(X, labels)


def make_population(n_features: int = 4, n_informative: int = 2, class_sep: float = 0.4,
                    flip_y: float = 0.1, rng: Optional[np.random.Generator] = None) -> Population:
    rng = np.random.default_rng(0) if rng is None else rng
    vertex = rng.choice([-1.0, 1.0], size=n_informative)
    return Population(class_sep * vertex, n_features, flip_y)


def generate(config: GeneratorConfig) -> Dataset:
    rng = config.rng.generator()
    pop = make_population(config.n_features, config.n_informative, config.class_sep, config.flip_y, rng)
    return pop.sample(config.n_samples, config.prevalence, rng)


@dataclass(frozen=True)
class LogisticModel:
    weights: tuple
    bias: float

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not all(np.isfinite(w)) or not np.isfinite(self.bias):
            raise InvalidConfig("non-finite logistic parameters")
        object.__setattr__(self, "weights", w)


def train_logistic(train: Dataset, epochs: int = 2000, learning_rate: float = 0.5,
                   rng: Optional[RngStream] = None, l2: float = 1e-4) -> LogisticModel:
    """Full-batch gradient descent on the mean log loss plus ``l2/2 * |w|^2``.

    Starts from zero weights and the log-odds of the training base rate, so the
    result does not depend on ``rng`` (accepted for interface symmetry).
    """
    X = np.asarray(train.features, dtype=float)
    y = (np.asarray(train.labels) == 1).astype(float)
    if y.min() == y.max():
        raise SingleClass("logistic regression needs both classes")
    base = y.mean()
    w = np.zeros(X.shape[1])
    b = float(np.log(base / (1 - base)))
    n = y.size
    for _ in range(epochs):
        r = expit(X @ w + b) - y
        w -= learning_rate * (X.T @ r / n + l2 * w)
        b -= learning_rate * float(r.mean())
    return LogisticModel(tuple(w), b)


def predict(model: LogisticModel, features) -> np.ndarray:
    """``(1 - s, s)`` per row with ``s = sigmoid(w . x + b)``; class 1 is positive."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.shape[1] != len(model.weights):
        raise ShapeMismatch(f"{X.shape[1]} features for a model with {len(model.weights)} weights")
    s = expit(X @ np.asarray(model.weights) + model.bias)
    return np.column_stack([1.0 - s, s])


# --- discrete populations --------------------------------------------------


@dataclass(frozen=True)
class DiscretePopulation:
    """A finite feature space of cells with development masses and posteriors.

    ``posteriors[j]`` is P_dev(Y = 1 | cell j); a classifier that outputs it is
    calibrated on development data by construction. Values are kept as
    :class:`fractions.Fraction` so exact Bayes computations are possible.
    """

    masses: tuple
    posteriors: tuple

    def __post_init__(self):
        m = tuple(Fraction(x) for x in self.masses)
        q = tuple(Fraction(x) for x in self.posteriors)
        if len(m) != len(q) or not m:
            raise InconsistentSpec("masses and posteriors must have the same non-zero length")
        if sum(m) != 1 or any(x < 0 for x in m):
            raise InconsistentSpec("cell masses must be non-negative and sum to 1")
        if any(x < 0 or x > 1 for x in q):
            raise InconsistentSpec("posteriors must lie in [0, 1]")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "posteriors", q)

    @classmethod
    def from_joint(cls, joint) -> "DiscretePopulation":
        """From a table of development joint probabilities ``joint[cell][class]``;
        posteriors are recomputed by counting."""
        rows = [tuple(Fraction(x) for x in r) for r in joint]
        if sum(sum(r) for r in rows) != 1:
            raise InconsistentSpec("joint probabilities must sum to 1")
        masses = tuple(r[0] + r[1] for r in rows)
        if any(m == 0 for m in masses):
            raise InconsistentSpec("every cell needs positive mass")
        return cls(masses, tuple(r[1] / (r[0] + r[1]) for r in rows))

    @property
    def dev_prior(self) -> tuple:
        p1 = sum(m * q for m, q in zip(self.masses, self.posteriors))
        return (1 - p1, p1)

    def class_conditionals(self) -> tuple:
        """``(P(cell | Y=0), P(cell | Y=1))`` as exact fractions."""
        p0, p1 = self.dev_prior
        if p0 == 0 or p1 == 0:
            raise InconsistentSpec("both classes need positive development mass")
        given0 = tuple(m * (1 - q) / p0 for m, q in zip(self.masses, self.posteriors))
        given1 = tuple(m * q / p1 for m, q in zip(self.masses, self.posteriors))
        return given0, given1

    def shifted_joint(self, app_prior) -> list:
        """Field joint ``[cell][class]`` under class prior ``app_prior``."""
        a0, a1 = (Fraction(x) for x in app_prior)
        g0, g1 = self.class_conditionals()
        return [(a0 * x0, a1 * x1) for x0, x1 in zip(g0, g1)]

    def shifted_posteriors(self, app_prior) -> tuple:
        """Exact P_app(Y = 1 | cell) by counting in the shifted joint (None where
        the cell has no field mass)."""
        return tuple(None if j0 + j1 == 0 else j1 / (j0 + j1) for j0, j1 in self.shifted_joint(app_prior))

    def field_expected_score(self, app_prior) -> Fraction:
        """E_app[C_1] for the calibrated classifier, exactly."""
        return sum((j0 + j1) * q for (j0, j1), q in zip(self.shifted_joint(app_prior), self.posteriors))

    def predictions(self) -> np.ndarray:
        q = np.array([float(x) for x in self.posteriors])
        return np.column_stack([1.0 - q, q])


@dataclass(frozen=True, eq=False)
class CalibratedSample:
    dev: LabeledPredictionSet
    field: UnlabeledPredictionSet
    field_labels: np.ndarray
    truth: np.ndarray
    dev_cells: np.ndarray
    field_cells: np.ndarray


def make_calibrated_population(population: DiscretePopulation, shift: Sequence[float], rng: RngStream,
                               n_dev: int = 1000, n_field: int = 1000) -> CalibratedSample:
    """Sample development and field sets from ``population``.

    Development samples carry the exact development posterior of their cell as
    prediction; field samples are drawn from the same class-conditional cell
    distributions mixed with class prior ``shift``.
    """
    truth = as_probability_vector(shift)
    g = rng.generator()
    preds = population.predictions()

    dev_joint = np.array([[float(m * (1 - q)), float(m * q)] for m, q in zip(population.masses, population.posteriors)])
    field_joint = np.array([[float(a), float(b)] for a, b in population.shifted_joint(tuple(Fraction(float(x)) for x in truth))])

    def draw(joint, n):
        flat = joint.ravel() / joint.sum()
        idx = g.choice(flat.size, size=n, p=flat)
        return idx // 2, idx % 2

    dev_cells, dev_labels = draw(dev_joint, n_dev)
    field_cells, field_labels = draw(field_joint, n_field)
    dev = LabeledPredictionSet(preds[dev_cells], labels=dev_labels)
    field_set = UnlabeledPredictionSet(preds[field_cells])
    return CalibratedSample(dev, field_set, field_labels, truth, dev_cells, field_cells)


def random_population(rng: np.random.Generator, n_cells: int, denominator: int = 1000) -> DiscretePopulation:
    """Random population with rational masses and posteriors (denominator-bounded)."""
    raw = rng.integers(1, denominator, size=(n_cells, 2))
    total = int(raw.sum())
    return DiscretePopulation.from_joint([[Fraction(int(a), total), Fraction(int(b), total)] for a, b in raw])
