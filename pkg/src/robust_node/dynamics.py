"""Controlled tanh vector field, its derivatives, and the explicit Euler flow.

A control value is a pair ``(W, b)`` with ``W`` a ``d x d`` matrix and ``b`` a
``d``-vector; the flattened control stacks ``W`` row-major followed by ``b``,
so ``m = d**2 + d``.  Ensembles are plain arrays of shape ``(M, N, d)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import NumericalAbort


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on ``[0, horizon]`` with ``n_nodes`` Euler steps."""

    horizon: float = 1.0
    n_nodes: int = 20

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError(f"n_nodes must be >= 1, got {self.n_nodes}")
        if not self.horizon > 0:
            raise ValueError(f"horizon must be > 0, got {self.horizon}")

    @property
    def step(self) -> float:
        return self.horizon / self.n_nodes

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_nodes + 1) * self.step


class ControlValue(NamedTuple):
    W: np.ndarray
    b: np.ndarray

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W.ravel(), self.b])

    @classmethod
    def from_flat(cls, omega, d: int) -> "ControlValue":
        omega = np.asarray(omega, dtype=float)
        if omega.shape != (d * d + d,):
            raise ValueError(f"expected flat control of length {d * d + d}, got {omega.shape}")
        return cls(omega[: d * d].reshape(d, d), omega[d * d:])


def control_dim(d: int) -> int:
    return d * d + d


@dataclass
class ControlSchedule:
    """Piecewise-constant controls; ``W[n], b[n]`` act on ``[t_n, t_{n+1})``."""

    grid: TimeGrid
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        L = self.grid.n_nodes
        d = self.b.shape[-1]
        if self.W.shape != (L, d, d) or self.b.shape != (L, d):
            raise ValueError(
                f"schedule shapes W{self.W.shape}, b{self.b.shape} do not match L={L}, d={d}"
            )
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.b))):
            raise ValueError("control schedule contains non-finite entries")

    @property
    def dim(self) -> int:
        return self.b.shape[-1]

    def __len__(self):
        return self.grid.n_nodes

    def __getitem__(self, n) -> ControlValue:
        return ControlValue(self.W[n], self.b[n])

    def flat(self) -> np.ndarray:
        """Controls as an ``(L, m)`` array."""
        L, d = self.b.shape
        return np.concatenate([self.W.reshape(L, d * d), self.b], axis=1)

    @classmethod
    def from_flat(cls, grid: TimeGrid, omega) -> "ControlSchedule":
        omega = np.asarray(omega, dtype=float)
        L, m = omega.shape
        d = int(round((-1 + np.sqrt(1 + 4 * m)) / 2))
        if control_dim(d) != m:
            raise ValueError(f"flat control width {m} is not d**2 + d for any d")
        return cls(grid, omega[:, : d * d].reshape(L, d, d).copy(), omega[:, d * d:].copy())

    @classmethod
    def zeros(cls, grid: TimeGrid, d: int = 2) -> "ControlSchedule":
        return cls(grid, np.zeros((grid.n_nodes, d, d)), np.zeros((grid.n_nodes, d)))

    @classmethod
    def random(cls, grid: TimeGrid, d: int = 2, scale: float = 0.1, seed=None) -> "ControlSchedule":
        """I.i.d. uniform entries in ``[-scale, scale]``."""
        rng = np.random.default_rng(seed)
        omega = rng.uniform(-scale, scale, size=(grid.n_nodes, control_dim(d)))
        return cls.from_flat(grid, omega)

    def copy(self) -> "ControlSchedule":
        return ControlSchedule(self.grid, self.W.copy(), self.b.copy())


@dataclass
class Trajectory:
    """Ensemble snapshots ``states[n]`` at ``t_n``, shape ``(L + 1, M, N, d)``."""

    grid: TimeGrid
    states: np.ndarray

    @property
    def initial(self) -> np.ndarray:
        return self.states[0]

    @property
    def terminal(self) -> np.ndarray:
        return self.states[-1]


def _preactivation(x, u: ControlValue):
    W, b = u
    x = np.asarray(x, dtype=float)
    d = b.shape[0]
    if W.shape != (d, d) or x.shape[-1] != d:
        raise ValueError(f"dimension mismatch: x{x.shape}, W{W.shape}, b{b.shape}")
    # elementwise reduction instead of BLAS so results do not depend on batch shape
    return (x[..., None, :] * W).sum(axis=-1) + b


def vector_field(x, u: ControlValue) -> np.ndarray:
    """``tanh(W x + b)``, broadcast over leading axes of ``x``."""
    return np.tanh(_preactivation(x, u))


def jacobian_state(x, u: ControlValue) -> np.ndarray:
    """``diag(1 - tanh(W x + b)**2) @ W``; shape ``(..., d, d)``."""
    s = 1.0 - np.tanh(_preactivation(x, u)) ** 2
    return s[..., :, None] * u.W


def jacobian_control(x, u: ControlValue) -> np.ndarray:
    """Derivative of the field with respect to the flattened control, shape ``(..., d, m)``."""
    x = np.asarray(x, dtype=float)
    s = 1.0 - np.tanh(_preactivation(x, u)) ** 2
    d = u.dim
    eye = np.eye(d)
    # d F_k / d W_{k', l} = s_k delta_{k k'} x_l
    dW = s[..., :, None, None] * eye[:, :, None] * x[..., None, None, :]
    dW = dW.reshape(x.shape[:-1] + (d, d * d))
    db = s[..., :, None] * eye
    return np.concatenate([dW, db], axis=-1)


def flow_forward(X0, u: ControlSchedule) -> Trajectory:
    """Explicit Euler: ``X_{n+1} = X_n + dt * F(X_n, u_n)``, trajectory-wise."""
    X0 = np.asarray(X0, dtype=float)
    if not np.all(np.isfinite(X0)):
        raise NumericalAbort("initial ensemble contains non-finite entries", node=0)
    grid = u.grid
    dt = grid.step
    states = np.empty((grid.n_nodes + 1,) + X0.shape)
    states[0] = X0
    for n in range(grid.n_nodes):
        states[n + 1] = states[n] + dt * vector_field(states[n], u[n])
        if not np.all(np.isfinite(states[n + 1])):
            raise NumericalAbort("non-finite state in forward flow", node=n + 1)
    return Trajectory(grid, states)


def hamiltonian(X, P, u: ControlValue, beta: float = 0.0) -> float:
    """``sum_ij <p_ij, F(x_ij, u)> - beta * |u|^2``."""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    if X.shape != P.shape:
        raise ValueError(f"state/covector shape mismatch: {X.shape} vs {P.shape}")
    pairing = float(np.sum(P * vector_field(X, u)))
    return pairing - beta * float(np.sum(u.flat() ** 2))


def hamiltonian_control_gradient(X, P, u: ControlValue, beta: float = 0.0) -> np.ndarray:
    """Gradient of :func:`hamiltonian` in the flattened control."""
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    if X.shape != P.shape:
        raise ValueError(f"state/covector shape mismatch: {X.shape} vs {P.shape}")
    d = u.dim
    # sum_ij J_u(x_ij)^T p_ij without materialising the (M, N, d, m) tensor
    s = 1.0 - np.tanh(_preactivation(X, u)) ** 2
    sp = (s * P).reshape(-1, d)
    xs = X.reshape(-1, d)
    grad_W = sp.T @ xs
    grad_b = sp.sum(axis=0)
    return np.concatenate([grad_W.ravel(), grad_b]) - 2.0 * beta * u.flat()
