"""Acceptance suite: one test per criterion.

Each test records a PASS/FAIL line in ``RESULTS``; ``conftest.py`` prints
them at the end of the session. Run alone with::

    pytest tests/test_acceptance.py -v
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from oracles import binary_reduction, compositions, em_grid_best, finite_difference, map_grid_best, regression_data
from urc.baselines import EmConfig, em_log_likelihood, expectation_maximization
from urc.core import CellHistogram, ConfusionMatrix, RngStream, normalize
from urc.harness.cli import main
from urc.harness.experiments import Experiment, ExperimentConfig, median_error, run_local_experiment, run_quantification_experiment
from urc.losses import LossConfig, combined_loss_and_gradient, multinomial_log_mass
from urc.metrics import binned_brier, brier_decomposition
from urc.prevalence import MapConfig, linear_solve_estimate, map_estimate
from urc.recalibrate import recalibrate_prediction
from urc.regression import default_regression_config, regression_urc
from urc.synthdata import make_calibrated_population, random_population

RESULTS = {}


def record(number, ok, detail):
    RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[number]


def random_fraction(rng, lo=Fraction(0), hi=Fraction(1), denominator=997):
    """Uniform rational strictly inside (lo, hi)."""
    k = int(rng.integers(1, denominator))
    return lo + (hi - lo) * Fraction(k, denominator)


def test_01_exact_bayes_reweighting():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        pop = random_population(rng, int(rng.integers(1, 9)))
        a1 = random_fraction(rng)
        app = (1 - a1, a1)
        exact = pop.shifted_posteriors(app)
        dev = [float(x) for x in pop.dev_prior]
        for c, q in zip(pop.predictions(), exact):
            out = recalibrate_prediction(c, dev, [float(x) for x in app])
            worst = max(worst, abs(out[1] - float(q)))
    elapsed = time.perf_counter() - start
    record(1, worst <= 1e-12 and elapsed < 1.0, f"max error {worst:.2e}, {elapsed:.3f} s")


def test_02_naive_estimate_sandwich():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    violations, checked = 0, 0
    while checked < 200:
        pop = random_population(rng, int(rng.integers(2, 9)))
        if len(set(pop.posteriors)) < 2:
            continue  # no discrimination
        p_dev = pop.dev_prior[1]
        p_app = random_fraction(rng, hi=p_dev)
        expected = pop.field_expected_score((1 - p_app, p_app))
        violations += not (p_app < expected <= p_dev)
        checked += 1
    elapsed = time.perf_counter() - start
    record(2, violations == 0 and elapsed < 1.0, f"{violations} violations in {checked}, {elapsed:.3f} s")


def test_03_linear_recovery():
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(100):
        m = (2, 4)[i % 2]
        M = ConfusionMatrix(rng.dirichlet(np.ones(m), size=2))
        p = normalize(rng.uniform(0.05, 1, 2))
        est = linear_solve_estimate(M, M.cell_distribution(p))
        worst = max(worst, float(np.abs(est.p - p).max()))
    record(3, worst <= 1e-9, f"max error {worst:.2e}")


def test_04_map_grid_and_gradient():
    rng = np.random.default_rng(4)
    excess = -np.inf
    for _ in range(50):
        m = int(rng.choice([2, 3, 4]))
        M = ConfusionMatrix(rng.dirichlet(np.ones(m), size=2))
        h = CellHistogram(rng.multinomial(int(rng.integers(1, 3000)), rng.dirichlet(np.ones(m))))
        cfg = MapConfig(LossConfig(kl_weight=float(rng.choice([0.0, 0.1, 1.0, 10.0])),
                                   prior=normalize(rng.uniform(0.05, 1, 2))))
        est = map_estimate(h, M, cfg)
        _, best = map_grid_best(h, M, cfg.loss)
        excess = max(excess, est.final_loss - best)

    worst = 0.0
    for _ in range(100):
        m = int(rng.choice([2, 4, 8]))
        M = ConfusionMatrix(rng.dirichlet(np.ones(m), size=2))
        h = CellHistogram(rng.multinomial(200, rng.dirichlet(np.ones(m)) * 0.9 + 0.1 / m))
        cfg = LossConfig(rng.uniform(0, 2), rng.uniform(0, 1), normalize(rng.uniform(0.05, 1, 2)))
        t = rng.uniform(0.05, 0.95)
        p = np.array([1 - t, t])
        _, grad = combined_loss_and_gradient(h, M, p, cfg)
        fd = finite_difference(lambda x: combined_loss_and_gradient(h, M, x, cfg)[0], p)
        worst = max(worst, float(np.abs(grad - fd).max() / np.abs(grad).max()))
    record(4, excess <= 1e-6 and worst <= 1e-4,
           f"MAP minus grid best at most {excess:.2e}; gradient relative error {worst:.2e}")


def test_05_multinomial_normalization():
    rng = np.random.default_rng(5)
    worst = 0.0
    for m in (1, 2, 3):
        for total in range(7):
            raw = rng.uniform(0.05, 1, m)
            vectors = [raw / raw.sum()]
            if m > 1:
                vectors.append(np.arange(m) / sum(range(m)))  # first cell has zero mass
            for probs in vectors:
                mass = math.fsum(math.exp(multinomial_log_mass(total, k, probs)) for k in compositions(total, m))
                worst = max(worst, abs(mass - 1.0))
    record(5, worst <= 1e-9, f"max deviation from 1: {worst:.2e}")


def _quantification(experiment):
    config = ExperimentConfig(Experiment(experiment), test_sizes=(3000,), replicas=30, seed=0)
    start = time.perf_counter()
    rows = run_quantification_experiment(config, workers=1)
    elapsed = time.perf_counter() - start
    errors = {m: median_error(rows, m, 3000) for m in ("cc", "acc", "em", "urc")}
    detail = ", ".join(f"{m.upper()} {e:.4f}" for m, e in errors.items()) + f"; {elapsed:.0f} s"
    return errors, elapsed, detail


@pytest.mark.slow
def test_06_balanced_test_experiment():
    e, elapsed, detail = _quantification("balanced_test")
    ok = e["urc"] < 0.05 and e["em"] < 0.05 and e["cc"] > e["urc"] and e["acc"] > e["urc"] and elapsed < 300
    record(6, ok, "median errors " + detail)


@pytest.mark.slow
def test_07_balanced_training_experiment():
    e, elapsed, detail = _quantification("balanced_training")
    ok = max(e["urc"], e["acc"], e["em"]) < 0.03 and e["cc"] > max(e["urc"], e["acc"], e["em"])
    record(7, ok, "median errors " + detail)


@pytest.mark.slow
def test_08_local_sweep():
    rows = run_local_experiment([0.9, 0.6, 0.5], n_per_group=3000, seed=0)
    delta = {(r.base_rate, r.group): r.brier_after - r.brier_before for r in rows}
    gain = {rate: -(delta[(rate, "a")] + delta[(rate, "b")]) / 2 for rate in (0.9, 0.6, 0.5)}
    both_improve = delta[(0.9, "a")] < 0 and delta[(0.9, "b")] < 0
    neutral = max(abs(delta[(0.5, "a")]), abs(delta[(0.5, "b")]))
    ok = both_improve and gain[0.9] > gain[0.6] and neutral < 0.01
    record(8, ok, f"mean Brier gain 0.9/0.1 {gain[0.9]:.4f}, 0.6/0.4 {gain[0.6]:.4f}; "
                  f"largest change at 0.5/0.5 {neutral:.4f}")


def test_09_brier_decomposition():
    rng = np.random.default_rng(9)
    worst, negative = 0.0, 0
    for _ in range(100):
        s = rng.random(int(rng.integers(1, 1000)))
        y = (rng.random(s.size) < s ** rng.uniform(0.3, 3)).astype(int)
        bins = int(rng.integers(1, 30))
        d = brier_decomposition(s, y, bins)
        worst = max(worst, abs(d.calibration + d.refinement - binned_brier(s, y, bins)))
        negative += d.calibration < 0 or d.refinement < 0
    record(9, worst <= 1e-12 and negative == 0, f"max identity error {worst:.2e}, {negative} negative components")


def test_10_em_ascent_and_optimum():
    rng = np.random.default_rng(10)
    drop, gap = 0.0, -np.inf
    for i in range(50):
        pop = random_population(rng, int(rng.integers(2, 9)))
        dev_prior = np.array([float(x) for x in pop.dev_prior])
        shift = rng.dirichlet(np.ones(2)) * 0.98 + 0.01
        data = make_calibrated_population(pop, shift, RngStream(10, i), n_dev=10, n_field=int(rng.integers(10, 2000)))
        trace = []
        est = expectation_maximization(data.field, dev_prior, trace=trace, config=EmConfig(max_iterations=20_000))
        drop = max(drop, float(-np.diff(trace).min(initial=0.0)))
        _, best = em_grid_best(data.field.predictions, dev_prior)
        gap = max(gap, best - em_log_likelihood(data.field.predictions, dev_prior, est.p))
    record(10, drop <= 1e-9 and gap <= 1e-6, f"largest decrease {drop:.2e}; grid best minus EM at most {gap:.2e}")


def test_11_cli_determinism(tmp_path):
    args = ["quantify-compare", "--seed", "11", "--sizes", "50,500", "--replicas", "3"]
    outputs = []
    for name, workers in (("run1", 1), ("run2", 1), ("threads4", 4)):
        path = tmp_path / f"{name}.csv"
        code = main(args + ["--workers", str(workers), "--out", str(path)])
        outputs.append(path.read_bytes() if code == 0 else None)
    ok = outputs[0] is not None and outputs[0] == outputs[1] == outputs[2]
    record(11, ok, f"{len(outputs[0] or b'')} bytes, identical across repeat and 1 vs 4 threads: {ok}")


def test_12_regression_reduction():
    worst = 0.0
    cfg = default_regression_config()
    for seed in range(20):
        rng = np.random.default_rng(1200 + seed)
        points, targets, field, _ = regression_data(rng, n_dev=int(rng.integers(200, 2000)),
                                                    n_field=int(rng.integers(50, 1000)), shift=rng.uniform(-1, 1))
        res = regression_urc(points, targets, field, 2, cfg)
        binary = binary_reduction(points, targets, field, cfg)
        worst = max(worst, float(np.abs(res.estimate.p - binary.estimate.p).max()))
    record(12, worst <= 1e-9, f"max difference {worst:.2e}")
