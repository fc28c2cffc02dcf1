import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robust_node.weights import (
    check_weight_matrix,
    gibbs_weights,
    make_weights,
    row_entropy,
    uniform_weights,
    worst_case_weights,
)

loss_matrices = arrays(
    np.float64,
    st.tuples(st.integers(1, 6), st.integers(1, 6)),
    elements=st.floats(0.0, 10.0, allow_nan=False),
)


def assert_simplex(gamma):
    assert np.all(gamma >= 0)
    np.testing.assert_allclose(gamma.sum(axis=1), 1.0, rtol=0, atol=1e-12)


class TestUniform:
    def test_quarter(self):
        np.testing.assert_array_equal(uniform_weights(3, 4), 0.25)

    def test_single(self):
        np.testing.assert_array_equal(uniform_weights(5, 1), 1.0)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            uniform_weights(0, 3)


class TestGibbs:
    def test_zero_temperature_is_uniform(self, rng):
        np.testing.assert_allclose(gibbs_weights(rng.uniform(size=(4, 3)), 0.0), 1 / 3)

    def test_equal_losses(self):
        np.testing.assert_allclose(gibbs_weights(np.full((2, 5), 0.7), 100.0), 0.2)

    def test_two_entry_row(self):
        np.testing.assert_allclose(gibbs_weights([[0.2, 0.4]], 5.0), [[0.26894, 0.73106]], atol=5e-6)

    def test_no_overflow_at_large_temperature(self):
        gamma = gibbs_weights([[30.0, 31.0, 5.0]], 100.0)
        assert np.all(np.isfinite(gamma))
        assert_simplex(gamma)

    @given(loss_matrices, st.floats(-50, 50))
    def test_shift_invariance(self, losses, shift):
        base = gibbs_weights(losses, 3.0)
        shifted = gibbs_weights(losses + shift, 3.0)
        np.testing.assert_allclose(shifted, base, atol=1e-12)

    def test_rejects_negative_temperature(self):
        with pytest.raises(ValueError):
            gibbs_weights([[1.0, 2.0]], -1.0)


class TestWorstCase:
    def test_unique_argmax(self):
        np.testing.assert_array_equal(worst_case_weights([[0.5, 0.9, 0.2, 0.1]]), [[0, 1, 0, 0]])

    def test_tie_split(self):
        np.testing.assert_array_equal(worst_case_weights([[0.9, 0.9, 0.1]]), [[0.5, 0.5, 0]])

    def test_matches_large_temperature(self, rng):
        losses = rng.uniform(0, 2, size=(500, 4))
        srt = np.sort(losses, axis=1)
        ok = srt[:, -1] - srt[:, -2] >= 0.01
        diff = np.abs(gibbs_weights(losses, 1e4) - worst_case_weights(losses))[ok]
        assert ok.sum() > 100
        assert diff.max() < 1e-6


@settings(max_examples=200)
@given(loss_matrices, st.sampled_from(["uniform", "gibbs", "worst_case"]), st.floats(0, 1e4))
def test_all_schemes_on_simplex(losses, scheme, c):
    gamma = make_weights(scheme, losses, c)
    assert gamma.shape == losses.shape
    assert_simplex(gamma)
    check_weight_matrix(gamma)


@given(loss_matrices, st.floats(0, 1e3))
def test_monotone_in_loss(losses, c):
    for gamma in (gibbs_weights(losses, c), worst_case_weights(losses)):
        for row_l, row_g in zip(losses, gamma):
            order = np.argsort(row_l, kind="stable")
            assert np.all(np.diff(row_g[order]) >= -1e-15)


def test_check_weight_matrix_rejects_bad_rows():
    with pytest.raises(ValueError):
        check_weight_matrix([[0.5, 0.4]])
    with pytest.raises(ValueError):
        check_weight_matrix([[1.5, -0.5]])
    with pytest.raises(ValueError):
        check_weight_matrix([[0.0, 0.0]])
    with pytest.raises(ValueError):
        check_weight_matrix([[0.5, 0.5]], shape=(2, 2))


def test_row_entropy():
    np.testing.assert_allclose(row_entropy([[0.5, 0.5], [1.0, 0.0]]), [np.log(2), 0.0])


def test_unknown_scheme():
    with pytest.raises(ValueError):
        make_weights("softmin", np.zeros((1, 2)))
