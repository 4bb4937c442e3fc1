import math

import numpy as np
import pytest

from ginicascade.errors import NonFiniteGradient
from ginicascade.models import ModelConfig, build_model
from ginicascade.numerics import (
    N_CLASSES,
    cross_entropy,
    gini_impurity,
    grad_check,
    is_distribution,
    sigmoid,
    softmax,
)


class TestSigmoid:
    def test_symmetry_point(self):
        assert sigmoid(0.0) == 0.5

    def test_saturation(self):
        assert sigmoid(30.0) == pytest.approx(1.0, abs=1e-9)
        assert sigmoid(-30.0) == pytest.approx(0.0, abs=1e-9)

    def test_no_overflow_at_extremes(self):
        z = np.array([-1e4, -500.0, 0.0, 500.0, 1e4])
        out = sigmoid(z)
        assert np.all(np.isfinite(out))
        assert np.all((out >= 0) & (out <= 1))

    def test_monotone(self, rng):
        z = np.sort(rng.uniform(-50, 50, size=200))
        out = sigmoid(z)
        assert np.all(np.diff(out) >= 0)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(np.zeros(5)), np.full(5, 0.2))

    def test_negated_flips_ranking(self):
        out = softmax([1.0, 0.0, 0.0, 0.0, 0.0], negate=True)
        assert out[0] == min(out)
        np.testing.assert_allclose(out[1:], out[1])

    def test_two_class_closed_form(self):
        out = softmax([math.log(2.0), 0.0])
        np.testing.assert_allclose(out, [2 / 3, 1 / 3], atol=1e-9)

    def test_always_valid_distribution(self, rng):
        for _ in range(50):
            z = rng.uniform(-1e4, 1e4, size=N_CLASSES)
            assert is_distribution(softmax(z))
            assert is_distribution(softmax(z, negate=True))


class TestCrossEntropy:
    def test_one_hot_correct(self):
        assert cross_entropy([0.0, 1.0, 0.0, 0.0, 0.0], 1) == pytest.approx(0.0, abs=1e-9)

    def test_uniform(self):
        assert cross_entropy(np.full(5, 0.2), 3) == pytest.approx(math.log(5), abs=1e-9)

    def test_floor(self):
        d = np.array([1e-20, 1.0, 0.0, 0.0, 0.0])
        assert cross_entropy(d, 0) == pytest.approx(-math.log(1e-12))

    def test_lower_bound_at_argmax(self, rng):
        for _ in range(100):
            d = softmax(rng.normal(size=N_CLASSES))
            best = -math.log(max(d))
            for c in range(N_CLASSES):
                ce = cross_entropy(d, c)
                assert ce >= best - 1e-12
                if c == int(np.argmax(d)):
                    assert ce == pytest.approx(best)


class TestGini:
    def test_one_hot_is_zero(self):
        for c in range(N_CLASSES):
            d = np.zeros(N_CLASSES)
            d[c] = 1.0
            assert gini_impurity(d) == pytest.approx(0.0)

    def test_uniform_is_max(self):
        assert gini_impurity(np.full(5, 0.2)) == pytest.approx(0.8)

    def test_half_half(self):
        assert gini_impurity([0.5, 0.5, 0.0, 0.0, 0.0]) == pytest.approx(0.5)

    def test_bounds(self, rng):
        for _ in range(200):
            d = softmax(rng.normal(scale=3.0, size=N_CLASSES))
            g = gini_impurity(d)
            assert -1e-12 <= g <= 0.8 + 1e-12

    def test_batched(self, rng):
        probs = softmax(rng.normal(size=(10, N_CLASSES)))
        g = gini_impurity(probs)
        assert g.shape == (10,)


class TestGradCheck:
    @pytest.mark.parametrize(
        "config",
        [
            ModelConfig(kind="ddt", depth=2, lambda_base=0.3),
            ModelConfig(kind="mlp", hidden=(4, 3)),
        ],
    )
    def test_models_pass(self, config, rng):
        X = rng.integers(0, 5, size=(8, 6)).astype(float)
        y = rng.integers(0, 5, size=8)
        model = build_model(config, 6, seed=1)
        report = grad_check(model, X, y, epsilon=1e-5, tolerance=1e-4)
        assert report.passed
        assert report.max_relative_error <= 1e-4

    def test_ten_seeds_both_families(self, rng):
        X = rng.integers(0, 5, size=(8, 6)).astype(float)
        y = rng.integers(0, 5, size=8)
        for seed in range(10):
            for config in (ModelConfig(kind="ddt", depth=2), ModelConfig(kind="mlp", hidden=(4, 3))):
                model = build_model(config, 6, seed=seed)
                p = model.params_vector()
                model.set_params_vector(p + np.random.default_rng(seed).normal(0, 0.2, p.size))
                assert grad_check(model, X, y).passed

    def test_zero_gradient_negative_control(self, rng):
        model = build_model(ModelConfig(kind="mlp", hidden=(4,)), 6, seed=0)

        class Zeroed:
            def params_vector(self):
                return model.params_vector()

            def set_params_vector(self, v):
                model.set_params_vector(v)

            def loss(self, X, y):
                return model.loss(X, y)

            def loss_and_grads(self, X, y):
                loss, g = model.loss_and_grads(X, y)
                return loss, np.zeros_like(g)

        X = rng.integers(0, 5, size=(8, 6)).astype(float)
        y = rng.integers(0, 5, size=8)
        assert not grad_check(Zeroed(), X, y).passed

    def test_non_finite_raises(self, rng):
        model = build_model(ModelConfig(kind="mlp", hidden=(4,)), 6, seed=0)

        class Broken:
            params_vector = model.params_vector
            set_params_vector = model.set_params_vector
            loss = model.loss

            def loss_and_grads(self, X, y):
                loss, g = model.loss_and_grads(X, y)
                g[0] = np.nan
                return loss, g

        X = rng.integers(0, 5, size=(4, 6)).astype(float)
        y = rng.integers(0, 5, size=4)
        with pytest.raises(NonFiniteGradient):
            grad_check(Broken(), X, y)
