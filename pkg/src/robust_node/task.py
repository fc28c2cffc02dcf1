"""Synthetic two-class task on the unit square.

Points are labelled by which side of a sine-shaped curve they fall on, training
points keep a margin from that curve, and each training point gets a fixed set
of perturbations inside an infinity-norm ball.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np


@dataclass(frozen=True)
class Boundary:
    """The curve ``x2 = offset + amplitude * sin(2 pi frequency x1)``."""

    offset: float = 0.5
    amplitude: float = 0.2
    frequency: float = 1.0

    def __call__(self, x1):
        return self.offset + self.amplitude * np.sin(2.0 * np.pi * self.frequency * np.asarray(x1))

    def signed_distance(self, points):
        """Vertical offset ``x2 - boundary(x1)``; positive above the curve."""
        points = np.asarray(points, dtype=float)
        return points[..., 1] - self(points[..., 0])

    def label(self, points):
        return (self.signed_distance(points) > 0).astype(int)


@dataclass(frozen=True)
class ClassTargets:
    t0: tuple = (-1.0, 0.0)
    t1: tuple = (1.0, 0.0)
    kappa: float = 4.0

    def __post_init__(self):
        if np.array_equal(np.asarray(self.t0), np.asarray(self.t1)):
            raise ValueError("class targets must differ")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa}")

    def target(self, labels):
        """Target point per label, shape ``labels.shape + (2,)``."""
        stacked = np.array([self.t0, self.t1], dtype=float)
        return stacked[np.asarray(labels, dtype=int)]


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    seed: int
    margin: float
    boundary: Boundary = field(default_factory=Boundary)

    def __len__(self):
        return len(self.points)


@dataclass
class PerturbedBatch:
    """Initial ensemble ``x_ij(0) = x_i + alpha_ij``, shape ``(M, N, 2)``."""

    dataset: Dataset
    perturbations: np.ndarray
    epsilon: float

    @property
    def ensemble(self):
        return self.dataset.points[:, None, :] + self.perturbations

    @property
    def labels(self):
        return self.dataset.labels

    @property
    def shape(self):
        return self.perturbations.shape[:2]

    def to_dict(self):
        ds = self.dataset
        return {
            "seed": ds.seed,
            "margin": ds.margin,
            "epsilon": self.epsilon,
            "boundary": asdict(ds.boundary),
            "points": ds.points.tolist(),
            "labels": ds.labels.tolist(),
            "perturbations": self.perturbations.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        ds = Dataset(
            points=np.asarray(data["points"], dtype=float),
            labels=np.asarray(data["labels"], dtype=int),
            seed=data["seed"],
            margin=data["margin"],
            boundary=Boundary(**data["boundary"]),
        )
        return cls(ds, np.asarray(data["perturbations"], dtype=float), data["epsilon"])

    def save(self, path, extra=None):
        payload = self.to_dict()
        if extra:
            payload["config"] = extra
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)


def generate_dataset(seed, M=200, margin=0.05, boundary=None, chunk=256) -> Dataset:
    """Rejection-sample ``M`` uniform points at vertical distance > ``margin`` from the curve."""
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if not 0 < margin < 0.5:
        raise ValueError(f"margin must lie in (0, 0.5), got {margin}")
    boundary = boundary or Boundary()
    rng = np.random.default_rng(seed)
    accepted = []
    n_accepted = n_drawn = 0
    while n_accepted < M:
        cand = rng.uniform(0.0, 1.0, size=(chunk, 2))
        keep = cand[np.abs(boundary.signed_distance(cand)) > margin]
        accepted.append(keep)
        n_accepted += len(keep)
        n_drawn += chunk
        if n_drawn >= 100 * chunk and n_accepted < 0.01 * n_drawn:
            raise RuntimeError(
                f"dataset sampling stalled: acceptance {n_accepted}/{n_drawn} with margin={margin}"
            )
    points = np.concatenate(accepted)[:M]
    return Dataset(points, boundary.label(points), int(seed), float(margin), boundary)


def perturbation_offsets(M, N, epsilon, seed=0):
    """Budget-extremal offsets ``alpha_ij``, shape ``(M, N, 2)``.

    ``N = 4`` gives the four axis directions, ``N = 1`` gives zero, and other
    ``N`` place points on the radius-``epsilon`` circle with a random phase per
    particle.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if N == 1:
        return np.zeros((M, 1, 2))
    if N == 4:
        axes = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
        return np.broadcast_to(epsilon * axes, (M, 4, 2)).copy()
    phase = np.random.default_rng([seed, 1]).uniform(0.0, 2.0 * np.pi, size=(M, 1))
    theta = 2.0 * np.pi * np.arange(N) / N + phase
    return epsilon * np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def generate_perturbations(ds: Dataset, N=4, epsilon=0.02) -> PerturbedBatch:
    if epsilon >= ds.margin:
        raise ValueError(
            f"epsilon={epsilon} must be smaller than the sampling margin {ds.margin}; "
            "larger budgets would flip labels"
        )
    alpha = perturbation_offsets(len(ds), N, epsilon, ds.seed)
    assert np.all(np.abs(alpha) <= epsilon + 1e-15)
    batch = PerturbedBatch(ds, alpha, float(epsilon))
    side = ds.boundary.label(batch.ensemble)
    if not np.all(side == ds.labels[:, None]):
        raise RuntimeError("a perturbed point crossed the class boundary")
    return batch


def terminal_loss(x, labels, targets: ClassTargets):
    """``|x - t_label|^2`` and its gradient ``2 (x - t_label)``; broadcasts over leading axes."""
    diff = np.asarray(x, dtype=float) - targets.target(labels)
    return np.sum(diff**2, axis=-1), 2.0 * diff


def class_score(xT, targets: ClassTargets):
    """``|x - t0|^2 - |x - t1|^2``; positive means closer to the class-1 target."""
    xT = np.asarray(xT, dtype=float)
    d0 = np.sum((xT - np.asarray(targets.t0)) ** 2, axis=-1)
    d1 = np.sum((xT - np.asarray(targets.t1)) ** 2, axis=-1)
    return d0 - d1


def predict_probability(xT, targets: ClassTargets):
    """Probability of class 1, ``logistic(kappa * score)``."""
    z = targets.kappa * class_score(xT, targets)
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def predict_class(xT, targets: ClassTargets):
    # same as probability > 0.5, without rounding to exactly 0.5 for tiny scores
    return (class_score(xT, targets) > 0).astype(int)
