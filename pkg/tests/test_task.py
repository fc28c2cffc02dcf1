import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_node.task import (
    Boundary,
    ClassTargets,
    PerturbedBatch,
    class_score,
    generate_dataset,
    generate_perturbations,
    perturbation_offsets,
    predict_class,
    predict_probability,
    terminal_loss,
)
from robust_node.verify import central_difference, relative_error


class TestDataset:
    def test_deterministic(self):
        a = generate_dataset(7, 200, 0.05)
        b = generate_dataset(7, 200, 0.05)
        assert np.array_equal(a.points, b.points) and np.array_equal(a.labels, b.labels)

    def test_margin_and_box(self):
        ds = generate_dataset(3, 200, 0.05)
        assert ds.points.shape == (200, 2)
        assert np.all((ds.points >= 0) & (ds.points <= 1))
        assert np.all(np.abs(ds.boundary.signed_distance(ds.points)) > 0.05)

    def test_labels_match_boundary_side(self):
        ds = generate_dataset(11, 200, 0.05)
        np.testing.assert_array_equal(ds.labels, (ds.points[:, 1] > 0.5 + 0.2 * np.sin(2 * np.pi * ds.points[:, 0])))
        assert set(np.unique(ds.labels)) == {0, 1}

    def test_both_classes_over_seeds(self):
        for seed in range(20):
            assert len(np.unique(generate_dataset(seed, 200, 0.05).labels)) == 2

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            generate_dataset(0, 1, 0.05)
        with pytest.raises(ValueError):
            generate_dataset(0, 10, 0.5)

    def test_stall_detected(self):
        # a flat curve at 0.5 with margin 0.499 leaves 0.2% of the square
        with pytest.raises(RuntimeError, match="stalled"):
            generate_dataset(0, 200, 0.499, boundary=Boundary(offset=0.5, amplitude=0.0))


class TestPerturbations:
    def test_zero_budget(self):
        ds = generate_dataset(0, 20, 0.05)
        batch = generate_perturbations(ds, 4, 0.0)
        np.testing.assert_array_equal(batch.ensemble, np.repeat(ds.points[:, None], 4, axis=1))

    def test_axis_pattern(self):
        alpha = perturbation_offsets(1, 4, 0.02)
        pts = np.array([0.5, 0.5]) + alpha[0]
        np.testing.assert_allclose(pts, [[0.52, 0.5], [0.48, 0.5], [0.5, 0.52], [0.5, 0.48]], atol=1e-15)

    @pytest.mark.parametrize("N", [1, 2, 3, 4, 7])
    def test_budget_respected(self, N):
        alpha = perturbation_offsets(30, N, 0.02, seed=4)
        assert alpha.shape == (30, N, 2)
        assert np.all(np.abs(alpha) <= 0.02 + 1e-15)

    def test_single_perturbation_is_zero(self):
        assert np.all(perturbation_offsets(5, 1, 0.02) == 0)

    def test_budget_must_stay_below_margin(self):
        ds = generate_dataset(0, 20, 0.05)
        with pytest.raises(ValueError):
            generate_perturbations(ds, 4, 0.05)

    def test_labels_preserved(self):
        ds = generate_dataset(5, 200, 0.05)
        batch = generate_perturbations(ds, 6, 0.04)
        assert np.all(ds.boundary.label(batch.ensemble) == ds.labels[:, None])

    def test_json_roundtrip(self, tmp_path):
        batch = generate_perturbations(generate_dataset(2, 30, 0.05), 4, 0.02)
        path = tmp_path / "data.json"
        batch.save(path, extra={"note": "x"})
        back = PerturbedBatch.from_dict(json.loads(path.read_text()))
        assert np.array_equal(back.ensemble, batch.ensemble)
        assert np.array_equal(back.labels, batch.labels)


class TestLoss:
    def test_minimum(self, targets):
        val, grad = terminal_loss(np.array(targets.t1), 1, targets)
        assert val == 0 and np.all(grad == 0)

    def test_squared_norm(self, targets):
        x = np.array(targets.t0) + [3.0, 4.0]
        val, grad = terminal_loss(x, 0, targets)
        assert val == 25.0
        np.testing.assert_array_equal(grad, [6.0, 8.0])

    @pytest.mark.parametrize("label", [0, 1])
    def test_gradient_finite_differences(self, rng, targets, label):
        x = rng.normal(size=2)
        fd = central_difference(lambda z: terminal_loss(z, label, targets)[0], x, 1e-5)
        assert relative_error(terminal_loss(x, label, targets)[1], fd) < 1e-8


class TestProbability:
    def test_equidistant(self, targets):
        assert predict_probability([0.0, 3.0], targets) == 0.5
        assert predict_class([0.0, 3.0], targets) == 0

    def test_at_class_one_target(self, targets):
        assert predict_probability(targets.t1, targets) > 0.5

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
    def test_monotone_in_score(self, a1, a2, b1, b2):
        t = ClassTargets()
        sa, sb = class_score([a1, a2], t), class_score([b1, b2], t)
        pa, pb = predict_probability([a1, a2], t), predict_probability([b1, b2], t)
        if sa < sb:
            assert pa <= pb

    def test_prediction_is_loss_argmin(self, rng, targets):
        x = rng.normal(size=(500, 2)) * 2
        l0, _ = terminal_loss(x, np.zeros(500, int), targets)
        l1, _ = terminal_loss(x, np.ones(500, int), targets)
        np.testing.assert_array_equal(predict_class(x, targets), (l1 < l0).astype(int))

    def test_targets_must_differ(self):
        with pytest.raises(ValueError):
            ClassTargets(t0=(1.0, 0.0), t1=(1.0, 0.0))
