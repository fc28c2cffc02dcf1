"""Shooting method: forward sweep, weighted terminal covectors, backward sweep with a
proximal Hamiltonian maximisation at every time node."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adjoint import flow_backward, hamiltonian_gradients, terminal_covector
from .dynamics import (
    ControlSchedule,
    ControlValue,
    TimeGrid,
    flow_forward,
    hamiltonian,
    hamiltonian_control_gradient,
)
from .exceptions import NumericalAbort
from .task import ClassTargets, terminal_loss
from .weights import make_weights, row_entropy

WEIGHT_SCHEMES = ("uniform", "gibbs", "worst_case")
MAX_HALVINGS = 20


@dataclass(frozen=True)
class ShootingConfig:
    iter_max: int = 1000
    tau: float = 0.1
    beta: float = 0.01
    inner_steps: int = 1
    weight_scheme: str = "gibbs"
    temperature: float = 100.0
    weight_refresh_period: int = 1
    init_scale: float = 0.1
    seed: int = 0
    horizon: float = 1.0
    n_layers: int = 20

    def __post_init__(self):
        if self.iter_max < 0:
            raise ValueError(f"iter_max must be >= 0, got {self.iter_max}")
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.inner_steps < 1:
            raise ValueError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise ValueError(f"weight_scheme must be one of {WEIGHT_SCHEMES}, got {self.weight_scheme!r}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.weight_refresh_period < 1:
            raise ValueError(f"weight_refresh_period must be >= 1, got {self.weight_refresh_period}")
        if self.init_scale < 0:
            raise ValueError(f"init_scale must be >= 0, got {self.init_scale}")

    @property
    def grid(self):
        return TimeGrid(self.horizon, self.n_layers)


@dataclass
class TrainingHistory:
    J: list = field(default_factory=list)
    J_Gamma: list = field(default_factory=list)
    pmp_residual: list = field(default_factory=list)
    weight_entropy_mean: list = field(default_factory=list)

    def __len__(self):
        return len(self.J)

    def append(self, J, J_Gamma, pmp_residual, weight_entropy_mean):
        self.J.append(float(J))
        self.J_Gamma.append(float(J_Gamma))
        self.pmp_residual.append(float(pmp_residual))
        self.weight_entropy_mean.append(float(weight_entropy_mean))


def hamiltonian_max_step(Xn, Pn, u_prev: ControlValue, tau, beta=0.0, inner_steps=1):
    """Approximately maximise ``H_beta(X, P, w) - |w - u_prev|^2 / (2 tau)`` over ``w``.

    Gradient ascent from ``u_prev`` with step ``tau / (1 + s)`` at inner step
    ``s``; each step is halved until the objective does not decrease.
    """
    d = u_prev.dim
    anchor = u_prev.flat()

    def h_aug(w):
        return hamiltonian(Xn, Pn, ControlValue.from_flat(w, d), beta) - np.sum((w - anchor) ** 2) / (2 * tau)

    w = anchor
    h = h_aug(w)
    for s in range(inner_steps):
        g = hamiltonian_control_gradient(Xn, Pn, ControlValue.from_flat(w, d), beta) - (w - anchor) / tau
        eta = tau / (1 + s)
        for _ in range(MAX_HALVINGS + 1):
            cand = w + eta * g
            h_cand = h_aug(cand)
            if h_cand >= h:
                break
            eta *= 0.5
        else:
            break
        w, h = cand, h_cand
    return ControlValue.from_flat(w, d)


def initial_controls(config: ShootingConfig, d=2) -> ControlSchedule:
    return ControlSchedule.random(config.grid, d, config.init_scale, config.seed)


class Sweep:
    """Forward/backward pass at a fixed control and weight matrix."""

    def __init__(self, X0, labels, u, targets, gamma_fn, beta):
        self.traj = flow_forward(X0, u)
        self.losses, grads = terminal_loss(self.traj.terminal, labels[:, None], targets)
        self.gamma = gamma_fn(self.losses)
        self.adj = flow_backward(self.traj, u, terminal_covector(self.traj.terminal, self.gamma, grads))
        self.h_grad = hamiltonian_gradients(self.traj, self.adj, u, beta)

    @property
    def J(self):
        return float(np.mean(self.losses.max(axis=1)))

    @property
    def J_Gamma(self):
        return float(np.sum(self.gamma * self.losses) / self.losses.shape[0])

    @property
    def pmp_residual(self):
        return float(np.max(np.linalg.norm(self.h_grad, axis=1)))


def train(config: ShootingConfig, batch, targets: ClassTargets, u0: ControlSchedule = None,
          callback=None):
    """Run ``config.iter_max`` shooting iterations.

    Returns ``(u, history)`` where ``history`` has ``iter_max + 1`` entries, one
    per iterate ``u^0 ... u^iter_max``.
    """
    X0 = np.asarray(batch.ensemble, dtype=float)
    labels = np.asarray(batch.labels, dtype=int)
    u = (u0 if u0 is not None else initial_controls(config, X0.shape[-1])).copy()
    if u.grid != config.grid:
        raise ValueError("initial controls are on a different time grid than the config")
    history = TrainingHistory()
    gamma = None

    def gamma_fn(losses):
        nonlocal gamma
        if gamma is None or (config.weight_scheme != "uniform" and k % config.weight_refresh_period == 0):
            gamma = make_weights(config.weight_scheme, losses, config.temperature)
        return gamma

    for k in range(config.iter_max + 1):
        try:
            sweep = Sweep(X0, labels, u, targets, gamma_fn, config.beta)
            history.append(sweep.J, sweep.J_Gamma, sweep.pmp_residual, np.mean(row_entropy(sweep.gamma)))
            if callback is not None:
                callback(k, u, sweep)
            if k == config.iter_max:
                break
            u = _backward_update(sweep, u, config)
        except NumericalAbort as exc:
            exc.iteration = k
            raise NumericalAbort(f"training diverged: {exc}", node=exc.node, iteration=k) from exc
    return u, history


def _backward_update(sweep: Sweep, u: ControlSchedule, config: ShootingConfig) -> ControlSchedule:
    L = u.grid.n_nodes
    W = np.empty_like(u.W)
    b = np.empty_like(u.b)
    # every node update reads only the k-th iterate, so the sweep order is immaterial
    for n in range(L - 1, -1, -1):
        W[n], b[n] = hamiltonian_max_step(
            sweep.traj.states[n], sweep.adj.covectors[n + 1], u[n],
            config.tau, config.beta, config.inner_steps,
        )
    try:
        return ControlSchedule(u.grid, W, b)
    except ValueError as exc:
        raise NumericalAbort(str(exc)) from exc
