import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbleak.calibration import apply_temperature, fit_temperature, golden_section
from cbleak.numerics import InvalidParameterError, softmax_vec


def overconfident(n=5000, J=4, T_true=2.0, seed=0):
    """Labels drawn from softmax(z); the reported probabilities are softmax(T z)."""
    rng = np.random.default_rng(seed)
    z = rng.normal(scale=1.5, size=(n, J))
    true_p = softmax_vec(z, axis=1)
    u = rng.random(n)
    y = np.minimum((u[:, None] >= np.cumsum(true_p, axis=1)).sum(axis=1), J - 1)
    return softmax_vec(T_true * z, axis=1), y


def grid_oracle(probs, y, grid):
    logits = np.log(probs)
    nll = []
    for T in grid:
        s = logits / T
        s = s - s.max(axis=1, keepdims=True)
        lse = np.log(np.exp(s).sum(axis=1))
        nll.append(np.mean(lse - s[np.arange(len(y)), y]))
    return grid[int(np.argmin(nll))]


class TestFitTemperature:
    def test_recovers_known_temperature(self):
        probs, y = overconfident()
        res = fit_temperature(probs, y)
        assert 1.8 <= res.temperature <= 2.2
        grid = np.arange(0.05, 20.0, 1e-3)
        assert abs(res.temperature - grid_oracle(probs, y, grid)) <= 2e-3

    def test_calibrated_input_stays_near_one(self):
        probs, y = overconfident(T_true=1.0, seed=3)
        assert 0.9 <= fit_temperature(probs, y).temperature <= 1.1

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.3, 4.0))
    def test_never_worse_than_identity(self, seed, T_true):
        probs, y = overconfident(n=200, J=3, T_true=T_true, seed=seed)
        res = fit_temperature(probs, y)
        assert res.nll_after <= res.nll_before + 1e-12

    def test_row_order_invariance(self):
        probs, y = overconfident(n=800)
        perm = np.random.default_rng(1).permutation(800)
        a = fit_temperature(probs, y).temperature
        b = fit_temperature(probs[perm], y[perm]).temperature
        assert abs(a - b) <= 1e-4

    def test_empty_rejected(self):
        with pytest.raises(InvalidParameterError):
            fit_temperature(np.zeros((0, 3)), np.zeros(0, dtype=int))


class TestApplyTemperature:
    def test_identity_at_one(self, rng):
        p = rng.dirichlet(np.ones(5), size=20)
        np.testing.assert_allclose(apply_temperature(p, 1.0), p, atol=1e-12)

    def test_large_temperature_is_uniform(self, rng):
        p = rng.dirichlet(np.ones(4), size=10)
        np.testing.assert_allclose(apply_temperature(p, 1e6), 0.25, atol=1e-5)

    @settings(max_examples=50)
    @given(st.integers(0, 10_000), st.floats(0.05, 20.0))
    def test_argmax_preserved(self, seed, T):
        p = np.random.default_rng(seed).dirichlet(np.ones(5), size=15)
        assert np.array_equal(np.argmax(apply_temperature(p, T), 1), np.argmax(p, 1))

    @pytest.mark.parametrize("T", [0.0, -1.0])
    def test_non_positive_rejected(self, T):
        with pytest.raises(InvalidParameterError):
            apply_temperature(np.full((1, 2), 0.5), T)


def test_golden_section_quadratic():
    assert golden_section(lambda t: (t - 3.3) ** 2, 0.05, 20.0, 1e-6) == pytest.approx(3.3, abs=1e-5)
