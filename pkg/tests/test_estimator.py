import numpy as np
import pytest
from sklearn.base import clone

from robust_node import RobustNODEClassifier
from robust_node.shooting import ShootingConfig, train
from robust_node.task import generate_dataset, generate_perturbations


@pytest.fixture(scope="module")
def data():
    ds = generate_dataset(0, 20, 0.05)
    return ds, generate_perturbations(ds, 4, 0.02)


def test_get_params_and_clone():
    clf = RobustNODEClassifier(method="worst-case", tau=0.2, random_state=5)
    params = clf.get_params()
    assert params["method"] == "worst-case" and params["tau"] == 0.2 and params["random_state"] == 5
    twin = clone(clf)
    assert twin.get_params() == params and twin is not clf


def test_set_params():
    clf = RobustNODEClassifier().set_params(iter_max=3, kappa=2.0)
    assert clf.iter_max == 3 and clf.kappa == 2.0


def test_matches_direct_training(data):
    ds, batch = data
    clf = RobustNODEClassifier(iter_max=5, random_state=2).fit(ds.points, ds.labels,
                                                                perturbations=batch.perturbations)
    u, hist = train(ShootingConfig(iter_max=5, seed=2), batch, clf.targets_)
    assert np.array_equal(clf.controls_.flat(), u.flat())
    assert clf.history_ == hist


def test_generated_perturbations_default(data):
    ds, batch = data
    a = RobustNODEClassifier(iter_max=3).fit(ds.points, ds.labels)
    b = RobustNODEClassifier(iter_max=3).fit(ds.points, ds.labels, perturbations=batch.perturbations)
    assert np.array_equal(a.controls_.flat(), b.controls_.flat())


def test_non_robust_ignores_perturbations(data):
    ds, batch = data
    a = RobustNODEClassifier(method="non-robust", iter_max=3).fit(ds.points, ds.labels)
    b = RobustNODEClassifier(method="non-robust", iter_max=3).fit(ds.points, ds.labels,
                                                                  perturbations=batch.perturbations)
    assert np.array_equal(a.controls_.flat(), b.controls_.flat())


def test_predict_interfaces(data):
    ds, _ = data
    clf = RobustNODEClassifier(iter_max=20).fit(ds.points, ds.labels.astype(str))
    proba = clf.predict_proba(ds.points)
    assert proba.shape == (20, 2)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    pred = clf.predict(ds.points)
    assert set(pred) <= {"0", "1"}
    np.testing.assert_array_equal(pred == "1", clf.decision_function(ds.points) > 0)
    assert clf.transform(ds.points).shape == (20, 2)
    assert 0.0 <= clf.score(ds.points, ds.labels.astype(str)) <= 1.0


def test_shared_initialization_across_methods(data):
    ds, _ = data
    inits = [RobustNODEClassifier(method=m, iter_max=0, random_state=4).fit(ds.points, ds.labels)
             .initial_controls_.flat() for m in ("non-robust", "uniform", "weighted", "worst-case")]
    assert all(np.array_equal(inits[0], x) for x in inits[1:])


@pytest.mark.parametrize("kwargs,match", [
    ({"method": "max"}, "method"),
    ({"tau": -1.0}, "tau"),
])
def test_invalid_params(data, kwargs, match):
    ds, _ = data
    with pytest.raises(ValueError, match=match):
        RobustNODEClassifier(iter_max=1, **kwargs).fit(ds.points, ds.labels)


def test_rejects_bad_input(data):
    ds, _ = data
    clf = RobustNODEClassifier(iter_max=1)
    with pytest.raises(ValueError):
        clf.fit(ds.points, np.zeros(20))
    with pytest.raises(ValueError):
        clf.fit(np.full((20, 2), np.nan), ds.labels)
    with pytest.raises(ValueError):
        clf.fit(ds.points, ds.labels, perturbations=np.zeros((19, 4, 2)))
    clf.fit(ds.points, ds.labels)
    with pytest.raises(ValueError):
        clf.predict(np.zeros((3, 3)))


def test_not_fitted():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        RobustNODEClassifier().predict(np.zeros((2, 2)))
