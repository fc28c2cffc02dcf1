"""Robust and weighted objectives, lattice metrics, and CSV exports."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .dynamics import ControlSchedule, flow_forward
from .task import Boundary, ClassTargets, predict_class, predict_probability, terminal_loss
from .weights import check_weight_matrix


def terminal_losses(batch, u: ControlSchedule, targets: ClassTargets):
    """Loss matrix ``g_i(x_ij(T))`` of shape ``(M, N)``."""
    traj = flow_forward(batch.ensemble, u)
    losses, _ = terminal_loss(traj.terminal, np.asarray(batch.labels)[:, None], targets)
    return losses


def robust_objective(batch, u: ControlSchedule, targets: ClassTargets) -> float:
    """Mean over particles of the worst terminal loss among their perturbations."""
    return float(np.mean(terminal_losses(batch, u, targets).max(axis=1)))


def weighted_objective(batch, u: ControlSchedule, gamma, targets: ClassTargets) -> float:
    losses = terminal_losses(batch, u, targets)
    gamma = check_weight_matrix(gamma, shape=losses.shape)
    return float(np.sum(gamma * losses) / losses.shape[0])


# lattice metrics ---------------------------------------------------------------


def lattice(resolution):
    """Uniform ``resolution x resolution`` points on the unit square, row-major in x1 then x2."""
    if resolution < 2:
        raise ValueError(f"grid resolution must be >= 2, got {resolution}")
    xs = np.linspace(0.0, 1.0, resolution)
    g1, g2 = np.meshgrid(xs, xs, indexing="ij")
    return np.stack([g1.ravel(), g2.ravel()], axis=-1)


def terminal_states(points, u: ControlSchedule):
    points = np.asarray(points, dtype=float)
    return flow_forward(points[:, None, :], u).terminal[:, 0, :]


@dataclass
class LatticePrediction:
    points: np.ndarray
    prob: np.ndarray
    predicted: np.ndarray
    true_label: np.ndarray
    signed_distance: np.ndarray

    @property
    def on_boundary(self):
        return self.signed_distance == 0.0

    @property
    def confidence(self):
        return np.maximum(self.prob, 1.0 - self.prob)

    @classmethod
    def from_terminal(cls, points, xT, targets, boundary):
        return cls(
            points=points,
            prob=predict_probability(xT, targets),
            predicted=predict_class(xT, targets),
            true_label=boundary.label(points),
            signed_distance=boundary.signed_distance(points),
        )


def predict_lattice(u, targets, resolution=101, boundary=None) -> LatticePrediction:
    boundary = boundary or Boundary()
    points = lattice(resolution)
    return LatticePrediction.from_terminal(points, terminal_states(points, u), targets, boundary)


def _accuracy(pred: LatticePrediction, mask):
    mask = mask & ~pred.on_boundary
    count = int(mask.sum())
    if count == 0:
        raise ValueError("no lattice points in the evaluation region")
    return float(np.mean(pred.predicted[mask] == pred.true_label[mask])), count


def accuracy_from_prediction(pred: LatticePrediction):
    return _accuracy(pred, np.ones(len(pred.points), dtype=bool))


def margin_accuracy_from_prediction(pred: LatticePrediction, margin):
    return _accuracy(pred, np.abs(pred.signed_distance) <= margin)


def high_confidence_from_prediction(pred: LatticePrediction, threshold=0.7):
    if not 0.5 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0.5, 1), got {threshold}")
    wrong = (pred.predicted != pred.true_label) & ~pred.on_boundary
    n_wrong = int(wrong.sum())
    if n_wrong == 0:
        return 0.0, 0
    return float(np.mean(pred.confidence[wrong] > threshold)), n_wrong


def test_accuracy(u, targets, grid_resolution=101, boundary=None):
    return accuracy_from_prediction(predict_lattice(u, targets, grid_resolution, boundary))[0]


def margin_accuracy(u, targets, grid_resolution=101, margin=0.05, boundary=None):
    pred = predict_lattice(u, targets, grid_resolution, boundary)
    return margin_accuracy_from_prediction(pred, margin)[0]


def high_confidence_mistakes(u, targets, grid_resolution=101, threshold=0.7, boundary=None):
    pred = predict_lattice(u, targets, grid_resolution, boundary)
    return high_confidence_from_prediction(pred, threshold)[0]


# keep pytest from collecting the metric as a test
test_accuracy.__test__ = False


@dataclass
class MetricsReport:
    test_accuracy: float
    margin_accuracy: float
    high_confidence_mistakes: float
    robust_objective: float
    seeds_used: list = field(default_factory=list)
    denominators: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def evaluate(u, targets, batch, grid_resolution=101, margin=0.05, threshold=0.7, boundary=None):
    boundary = boundary or batch.dataset.boundary
    pred = predict_lattice(u, targets, grid_resolution, boundary)
    acc, n_test = accuracy_from_prediction(pred)
    macc, n_band = margin_accuracy_from_prediction(pred, margin)
    hcm, n_wrong = high_confidence_from_prediction(pred, threshold)
    return MetricsReport(
        test_accuracy=acc,
        margin_accuracy=macc,
        high_confidence_mistakes=hcm,
        robust_objective=robust_objective(batch, u, targets),
        seeds_used=[int(batch.dataset.seed)],
        denominators={"test": n_test, "margin_band": n_band, "mistakes": n_wrong},
    )


# exports -----------------------------------------------------------------------


def _fmt(v):
    return f"{v:.17g}"


def export_level_set_grid(u, targets, grid_resolution, path, boundary=None):
    pred = predict_lattice(u, targets, grid_resolution, boundary)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x1", "x2", "prob_class1", "predicted", "true_label"])
            for (x1, x2), p, yhat, y in zip(pred.points, pred.prob, pred.predicted, pred.true_label):
                w.writerow([_fmt(x1), _fmt(x2), _fmt(p), int(yhat), int(y)])
    except OSError as exc:
        raise OSError(f"cannot write level-set grid to {path}: {exc}") from exc
    return pred


HISTORY_COLUMNS = ["iteration", "J", "J_Gamma", "pmp_residual", "weight_entropy_mean"]


def export_loss_history(history, path):
    """Write the training history as CSV with 17 significant digits.

    Rows with ``J == 0`` cannot go on a log axis; they are kept and listed in a
    leading ``#`` comment.
    """
    zero_rows = [k for k, j in enumerate(history.J) if j == 0.0]
    try:
        with open(path, "w", newline="") as fh:
            if zero_rows:
                fh.write(f"# rows with J = 0: {','.join(map(str, zero_rows))}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            for k in range(len(history)):
                w.writerow([k] + [_fmt(getattr(history, c)[k]) for c in HISTORY_COLUMNS[1:]])
    except OSError as exc:
        raise OSError(f"cannot write loss history to {path}: {exc}") from exc


def read_loss_history(path):
    from .shooting import TrainingHistory

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(line for line in fh if not line.startswith("#")))
    return TrainingHistory(**{c: [float(r[c]) for r in rows] for c in HISTORY_COLUMNS[1:]})
