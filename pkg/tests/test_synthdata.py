import csv
import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logit

from urc.core import RngStream
from urc.errors import InconsistentSpec, InvalidConfig, ShapeMismatch, SingleClass
from urc.synthdata import (
    Dataset,
    DiscretePopulation,
    GeneratorConfig,
    LogisticModel,
    generate,
    make_calibrated_population,
    make_population,
    positive_count,
    predict,
    random_population,
    train_logistic,
)


class TestGenerator:
    def test_exact_positive_count(self):
        d = generate(GeneratorConfig(1000, 0.05, flip_y=0.0, rng=RngStream(4)))
        assert int(d.labels.sum()) == 50

    def test_exact_count_with_label_noise(self):
        d = generate(GeneratorConfig(1000, 0.05, rng=RngStream(4)))
        assert int(d.labels.sum()) == 50

    def test_half_up_rounding(self):
        assert positive_count(50, 0.05) == 3
        assert positive_count(3000, 0.05) == 150

    def test_separable_limit(self):
        g = RngStream(2).generator()
        pop = make_population(class_sep=10.0, flip_y=0.0, rng=g)
        model = train_logistic(pop.sample(2000, 0.5, g))
        test = pop.sample(2000, 0.5, g)
        acc = np.mean(predict(model, test.features).argmax(axis=1) == test.labels)
        assert acc > 0.99

    def test_deterministic(self):
        a = generate(GeneratorConfig(300, 0.3, rng=RngStream(9, 1)))
        b = generate(GeneratorConfig(300, 0.3, rng=RngStream(9, 1)))
        assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
        assert a.to_csv() == b.to_csv()

    def test_shapes_and_noise_features(self):
        d = generate(GeneratorConfig(20_000, 0.5, n_features=4, n_informative=2, flip_y=0.0, rng=RngStream(1)))
        assert d.features.shape == (20_000, 4)
        diff = d.features[d.labels == 1].mean(axis=0) - d.features[d.labels == 0].mean(axis=0)
        np.testing.assert_allclose(np.abs(diff[:2]), 0.8, atol=0.05)
        np.testing.assert_allclose(diff[2:], 0.0, atol=0.05)

    def test_label_noise_rate(self):
        # flip_y = 0.1 moves about 5% of samples to the other cluster
        g = RngStream(5).generator()
        pop = make_population(flip_y=0.1, class_sep=50.0, rng=g)
        d = pop.sample(20_000, 0.5, g)
        cluster = (d.features[:, :2] @ np.sign(pop.centroid) > 0).astype(int)
        assert np.mean(cluster != d.labels) == pytest.approx(0.05, abs=0.006)

    @pytest.mark.parametrize("kwargs", [
        dict(n_samples=10, prevalence=0.0),
        dict(n_samples=10, prevalence=0.01),
        dict(n_samples=10, prevalence=0.5, n_informative=5),
        dict(n_samples=10, prevalence=0.5, flip_y=1.5),
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidConfig):
            GeneratorConfig(**kwargs)

    def test_csv(self):
        d = Dataset(np.array([[0.1, 1 / 3], [2.5, -1e-20]]), np.array([0, 1]))
        rows = list(csv.reader(io.StringIO(d.to_csv())))
        assert rows[0] == ["feature_1", "feature_2", "label"]
        assert float(rows[1][1]) == 1 / 3 and float(rows[2][1]) == -1e-20
        assert rows[2][2] == "1"


class TestLogistic:
    def test_two_points(self):
        d = Dataset(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([0, 1]))
        m = train_logistic(d)
        assert predict(m, d.features).argmax(axis=1).tolist() == [0, 1]

    def test_intercept_only(self):
        d = Dataset(np.zeros((100, 3)), np.array([1] * 30 + [0] * 70))
        m = train_logistic(d)
        np.testing.assert_allclose(m.weights, 0.0, atol=1e-12)
        assert m.bias == pytest.approx(logit(0.3), abs=0.05)

    def test_label_swap_symmetry(self):
        g = np.random.default_rng(3)
        x = g.standard_normal((400, 2))
        X = np.vstack([x + 1, -x - 1])
        y = np.array([1] * 400 + [0] * 400)
        m = train_logistic(Dataset(X, y))
        assert predict(m, np.zeros((1, 2)))[0, 1] == pytest.approx(0.5, abs=1e-3)

    def test_single_class(self):
        with pytest.raises(SingleClass):
            train_logistic(Dataset(np.zeros((3, 2)), np.ones(3, dtype=int)))

    def test_predict_examples(self):
        np.testing.assert_array_equal(predict(LogisticModel((0.0, 0.0), 0.0), [[3.0, -2.0]]), [[0.5, 0.5]])
        assert predict(LogisticModel((0.0,), 50.0), [[1.0]])[0, 1] > 1 - 1e-9
        np.testing.assert_array_equal(predict(LogisticModel((1.0,), 0.0), [[0.0]]), [[0.5, 0.5]])

    def test_predict_shape(self):
        with pytest.raises(ShapeMismatch):
            predict(LogisticModel((1.0, 2.0), 0.0), [[1.0]])


class TestDiscretePopulation:
    def test_inconsistent(self):
        with pytest.raises(InconsistentSpec):
            DiscretePopulation([Fraction(1, 2), Fraction(1, 3)], [0, 1])
        with pytest.raises(InconsistentSpec):
            DiscretePopulation.from_joint([[Fraction(1, 2), 0], [0, Fraction(1, 3)]])

    def test_two_cell_shift(self):
        pop = DiscretePopulation.from_joint([[Fraction(9, 20), Fraction(1, 20)], [Fraction(1, 10), Fraction(2, 5)]])
        assert pop.posteriors == (Fraction(1, 10), Fraction(4, 5))
        # P(class 0 | cell 0) goes from 0.9 to 0.75 when class 0 drops from 0.55 to 0.25
        dev0 = pop.dev_prior[0]
        shifted = pop.shifted_posteriors((Fraction(1, 4), Fraction(3, 4)))
        c0 = Fraction(9, 10)
        ratio = c0 * Fraction(1, 4) / dev0
        other = (1 - c0) * Fraction(3, 4) / pop.dev_prior[1]
        assert 1 - shifted[0] == ratio / (ratio + other)

    def test_balanced_two_cell_example(self):
        pop = DiscretePopulation((Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 10), Fraction(9, 10)))
        assert 1 - pop.shifted_posteriors((Fraction(1, 4), Fraction(3, 4)))[0] == Fraction(3, 4)

    @settings(max_examples=30)
    @given(st.integers(0, 2**32 - 1))
    def test_conditionals_preserved_exactly(self, seed):
        rng = np.random.default_rng(seed)
        pop = random_population(rng, int(rng.integers(1, 9)))
        shift = (Fraction(int(rng.integers(1, 99)), 100),)
        shift = (1 - shift[0], shift[0])
        joint = pop.shifted_joint(shift)
        g0, g1 = pop.class_conditionals()
        assert all(j0 / shift[0] == a for (j0, _), a in zip(joint, g0))
        assert all(j1 / shift[1] == b for (_, j1), b in zip(joint, g1))


class TestCalibratedSampling:
    POP = DiscretePopulation([Fraction(1, 4)] * 4, [Fraction(1, 10), Fraction(2, 5), Fraction(3, 5), Fraction(9, 10)])

    def test_no_shift(self):
        data = make_calibrated_population(self.POP, [0.5, 0.5], RngStream(0), n_dev=10_000, n_field=10_000)
        dev_freq = np.bincount(data.dev_cells, minlength=4) / 10_000
        field_freq = np.bincount(data.field_cells, minlength=4) / 10_000
        assert np.abs(np.cumsum(dev_freq) - np.cumsum(field_freq)).max() < 0.03

    def test_dev_is_calibrated(self):
        data = make_calibrated_population(self.POP, [0.5, 0.5], RngStream(1), n_dev=20_000)
        for j, q in enumerate(self.POP.posteriors):
            mask = data.dev_cells == j
            freq = data.dev.labels[mask].mean()
            assert abs(freq - float(q)) < 3 / np.sqrt(mask.sum())

    def test_shifted_labels(self):
        data = make_calibrated_population(self.POP, [0.9, 0.1], RngStream(2), n_field=20_000)
        assert data.field_labels.mean() == pytest.approx(0.1, abs=0.01)
        assert data.truth.tolist() == [0.9, 0.1]

    def test_deterministic(self):
        a = make_calibrated_population(self.POP, [0.7, 0.3], RngStream(3), n_field=50)
        b = make_calibrated_population(self.POP, [0.7, 0.3], RngStream(3), n_field=50)
        assert np.array_equal(a.field.predictions, b.field.predictions)
