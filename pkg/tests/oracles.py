"""Independent reference computations shared by the tests.

Each oracle is deliberately naive (dense grids, brute-force enumeration,
exact rational arithmetic) so that it shares no code path with the library
routine it checks.
"""

import itertools
import math
from fractions import Fraction

import numpy as np

from urc.baselines import em_log_likelihood
from urc.losses import combined_loss

GRID = np.linspace(0.0, 1.0, 1001)


def binary_grid(t):
    """Class vector with positive-class (index 1) mass ``t``."""
    return np.array([1.0 - t, t])


def map_grid_best(hist, m_a, loss_config):
    """Smallest combined loss over the 1001-point grid of binary class vectors."""
    values = np.array([combined_loss(hist, m_a, binary_grid(t), loss_config) for t in GRID])
    k = int(np.argmin(values))
    return GRID[k], float(values[k])


def em_grid_best(predictions, dev_prior):
    values = np.array([em_log_likelihood(predictions, dev_prior, binary_grid(t)) for t in GRID])
    k = int(np.argmax(values))
    return GRID[k], float(values[k])


def compositions(total, parts):
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        bounds = (-1,) + cuts + (total + parts - 1,)
        yield tuple(b - a - 1 for a, b in zip(bounds, bounds[1:]))


def multinomial_by_enumeration(counts, probs):
    """Probability of ``counts`` by summing over every ordered draw sequence."""
    total = sum(counts)
    target = tuple(counts)
    mass = 0.0
    for seq in itertools.product(range(len(probs)), repeat=total):
        if tuple(seq.count(j) for j in range(len(probs))) == target:
            mass += math.prod(probs[j] for j in seq)
    return mass


def bayes_posterior_by_counting(joint, cell):
    """Exact P(Y = 1 | cell) from a ``joint[cell][class]`` table of Fractions."""
    j0, j1 = joint[cell]
    return Fraction(j1) / (Fraction(j0) + Fraction(j1))


def finite_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def regression_data(rng, n_dev=3000, n_field=3000, shift=0.0, draws=40):
    """Targets first, predictions second, so P(prediction | target) is the
    same in development and field; only the target distribution moves.

    Returns dev point predictions, dev targets, field predictive sample sets
    and field targets.
    """
    def predictions(t):
        centre = t + 0.2 * rng.standard_normal(t.size)
        return centre[:, None] + 0.3 * rng.standard_normal((t.size, draws))

    t_dev = rng.standard_normal(n_dev)
    dev_samples = predictions(t_dev)
    t_field = shift + rng.standard_normal(n_field)
    return dev_samples.mean(axis=1), t_dev, list(predictions(t_field)), t_field


def binary_reduction(dev_points, dev_targets, field_samples, config, smoothing=0.5):
    """The two-interval regression problem rebuilt as a binary classifier.

    Scores are a monotone transform of the point prediction, so the median
    score cut separates the same samples as the median point cut; the label is
    "target above the median dev point prediction".
    """
    from scipy.special import expit

    from urc.core import LabeledPredictionSet, UnlabeledPredictionSet
    from urc.recalibrate import build_dev_summary, global_urc

    points = np.asarray(dev_points, dtype=float)
    median = np.sort(points)[math.ceil(points.size / 2) - 1]
    s = expit(points)
    labels = (np.asarray(dev_targets) > median).astype(int)
    dev = LabeledPredictionSet(np.column_stack([1 - s, s]), labels=labels)
    f = expit(np.array([np.mean(x) for x in field_samples]))
    field = UnlabeledPredictionSet(np.column_stack([1 - f, f]))
    return global_urc(build_dev_summary(dev, 2, smoothing), field, config)
