"""scikit-learn compatible wrapper around the shooting trainer."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .evaluation import terminal_states
from .shooting import ShootingConfig, initial_controls, train
from .task import ClassTargets, Dataset, PerturbedBatch, class_score, perturbation_offsets, predict_probability

METHODS = {
    "non-robust": "uniform",
    "uniform": "uniform",
    "weighted": "gibbs",
    "worst-case": "worst_case",
}


class RobustNODEClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Binary classifier whose features flow through a tanh neural ODE.

    Each training point is replaced by ``n_perturbations`` copies shifted
    inside an infinity-norm ball of radius ``epsilon``; controls are fit by the
    shooting method with the perturbation weights chosen by ``method``.

    Parameters
    ----------
    method : {"non-robust", "uniform", "weighted", "worst-case"}
        ``"non-robust"`` trains on the unperturbed points only.  ``"weighted"``
        uses softmax weights with inverse temperature ``temperature``.
    n_perturbations, epsilon
        Size and budget of the per-point perturbation set.
    n_layers, horizon
        Euler steps and final time of the flow.
    iter_max, tau, beta, inner_steps, weight_refresh_period, init_scale
        Shooting-method settings, see :class:`~robust_node.shooting.ShootingConfig`.
    t0, t1, kappa
        Class targets for the terminal loss and the readout sharpness.
    random_state : int
        Seeds the control initialisation (and circle-pattern perturbations).

    Attributes
    ----------
    controls_ : ControlSchedule
    initial_controls_ : ControlSchedule
    history_ : TrainingHistory
    classes_ : ndarray of shape (2,)
    """

    def __init__(self, method="weighted", n_perturbations=4, epsilon=0.02, temperature=100.0,
                 n_layers=20, horizon=1.0, iter_max=1000, tau=0.1, beta=0.01, inner_steps=1,
                 weight_refresh_period=1, init_scale=0.1, t0=(-1.0, 0.0), t1=(1.0, 0.0),
                 kappa=4.0, random_state=0):
        self.method = method
        self.n_perturbations = n_perturbations
        self.epsilon = epsilon
        self.temperature = temperature
        self.n_layers = n_layers
        self.horizon = horizon
        self.iter_max = iter_max
        self.tau = tau
        self.beta = beta
        self.inner_steps = inner_steps
        self.weight_refresh_period = weight_refresh_period
        self.init_scale = init_scale
        self.t0 = t0
        self.t1 = t1
        self.kappa = kappa
        self.random_state = random_state

    def _shooting_config(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {sorted(METHODS)}, got {self.method!r}")
        return ShootingConfig(
            iter_max=self.iter_max, tau=self.tau, beta=self.beta, inner_steps=self.inner_steps,
            weight_scheme=METHODS[self.method], temperature=self.temperature,
            weight_refresh_period=self.weight_refresh_period, init_scale=self.init_scale,
            seed=self.random_state, horizon=self.horizon, n_layers=self.n_layers,
        )

    @property
    def targets_(self):
        return ClassTargets(tuple(self.t0), tuple(self.t1), self.kappa)

    def fit(self, X, y, perturbations=None, callback=None):
        """Fit the controls.

        ``perturbations`` of shape ``(n_samples, N, n_features)`` overrides the
        generated perturbation pattern; ignored for ``method="non-robust"``.
        """
        X, y = validate_data(self, X, y)
        check_classification_targets(y)
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        if len(self.classes_) != 2:
            raise ValueError(f"expected 2 classes, got {len(self.classes_)}")
        if len(self.t0) != X.shape[1] or len(self.t1) != X.shape[1]:
            raise ValueError(f"class targets must have {X.shape[1]} coordinates")
        config = self._shooting_config()

        if self.method == "non-robust":
            alpha = np.zeros((len(X), 1, X.shape[1]))
        elif perturbations is not None:
            alpha = check_array(perturbations, allow_nd=True)
            if alpha.shape[0] != len(X) or alpha.shape[2] != X.shape[1]:
                raise ValueError(f"perturbations shape {alpha.shape} does not match X {X.shape}")
        elif X.shape[1] != 2 and self.n_perturbations != 1:
            raise ValueError("generated perturbations are only defined in 2-D; pass perturbations=")
        else:
            alpha = perturbation_offsets(len(X), self.n_perturbations, self.epsilon, self.random_state)

        batch = PerturbedBatch(Dataset(X, y_enc, self.random_state, margin=np.nan), alpha, self.epsilon)
        self.initial_controls_ = initial_controls(config, X.shape[1])
        self.controls_, self.history_ = train(config, batch, self.targets_, u0=self.initial_controls_,
                                              callback=callback)
        return self

    def transform(self, X):
        """Terminal states of the flow."""
        check_is_fitted(self, "controls_")
        X = validate_data(self, X, reset=False)
        return terminal_states(X, self.controls_)

    def decision_function(self, X):
        return class_score(self.transform(X), self.targets_)

    def predict_proba(self, X):
        p = predict_probability(self.transform(X), self.targets_)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        check_is_fitted(self, "controls_")
        return self.classes_[(self.decision_function(X) > 0).astype(int)]
