"""Numerical checks of the optimality conditions and of every analytic derivative.

Nothing here reuses the adjoint machinery it is meant to check, except
``pmp_residual`` which is by definition a statement about the adjoint.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .adjoint import flow_backward, hamiltonian_gradients, terminal_covector, weighted_objective_gradient
from .dynamics import (
    ControlSchedule,
    ControlValue,
    flow_forward,
    hamiltonian,
    hamiltonian_control_gradient,
    jacobian_control,
    jacobian_state,
    vector_field,
)
from .evaluation import weighted_objective
from .task import ClassTargets, terminal_loss
from .weights import check_weight_matrix

DEFAULT_STEP = 1e-5


def central_difference(f, x, h=DEFAULT_STEP):
    """Central-difference derivative of ``f: R^k -> R^q`` at ``x``, shape ``(q, k)`` (``(k,)`` for scalar ``f``)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for idx in range(x.size):
        e = np.zeros(x.size)
        e[idx] = h
        fp = np.asarray(f((x.ravel() + e).reshape(x.shape)), dtype=float)
        fm = np.asarray(f((x.ravel() - e).reshape(x.shape)), dtype=float)
        cols.append((fp - fm) / (2 * h))
    out = np.stack(cols, axis=-1)
    return out


def finite_difference_gradient(objective, u: ControlSchedule, h=DEFAULT_STEP):
    """Central-difference gradient of ``objective(ControlSchedule)`` per node, shape ``(L, m)``."""
    if not h > 0:
        raise ValueError(f"step must be > 0, got {h}")
    base = u.flat()
    grad = np.empty_like(base)
    for n in range(base.shape[0]):
        for c in range(base.shape[1]):
            vals = []
            for sign in (1.0, -1.0):
                probe = base.copy()
                probe[n, c] += sign * h
                v = objective(ControlSchedule.from_flat(u.grid, probe))
                if not np.isfinite(v):
                    raise FloatingPointError(f"objective not finite at probe node {n}, coordinate {c}")
                vals.append(v)
            grad[n, c] = (vals[0] - vals[1]) / (2 * h)
    return grad


def relative_error(a, b):
    a = np.ravel(a)
    b = np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def penalized_weighted_objective(batch, gamma, targets, beta):
    """``u -> J_Gamma(u) + beta * dt * sum_n |u_n|^2`` with ``gamma`` frozen."""

    def objective(u):
        return weighted_objective(batch, u, gamma, targets) + beta * u.grid.step * float(np.sum(u.flat() ** 2))

    return objective


def adjoint_gradient(batch, u, gamma, targets, beta):
    """Analytic gradient of :func:`penalized_weighted_objective` via the adjoint sweep."""
    traj = flow_forward(batch.ensemble, u)
    _, grads = terminal_loss(traj.terminal, np.asarray(batch.labels)[:, None], targets)
    adj = flow_backward(traj, u, terminal_covector(traj.terminal, gamma, grads))
    return weighted_objective_gradient(traj, adj, u, beta)


def pmp_residual(traj, adj, u, beta=0.0):
    """Largest per-node norm of the control gradient of the penalised Hamiltonian."""
    return float(np.max(np.linalg.norm(hamiltonian_gradients(traj, adj, u, beta), axis=1)))


def support_condition_check(gamma, losses, tol=0.0):
    """Per row: every weight above ``tol`` sits on a loss within ``tol`` of the row maximum."""
    gamma = check_weight_matrix(gamma)
    losses = np.asarray(losses, dtype=float)
    near_max = losses >= losses.max(axis=1, keepdims=True) - tol
    return np.all((gamma <= tol) | near_max, axis=1)


@dataclass
class SurrogateExtremalReport:
    pmp_residual: float
    fd_gradient_norm: float
    ratio: float
    threshold: float
    passed: bool
    converged: bool = True

    def to_dict(self):
        return asdict(self)


def surrogate_extremal_check(u, batch, gamma, targets: ClassTargets, beta=0.0, threshold=1e-3,
                             h=DEFAULT_STEP):
    """Is ``u`` stationary for the smooth problem weighted by ``gamma``?

    Reports the adjoint-based residual and the finite-difference gradient norm
    of the penalised weighted objective; passes when both are below
    ``threshold``.
    """
    M, N = np.asarray(batch.ensemble).shape[:2]
    gamma = check_weight_matrix(gamma, shape=(M, N))
    traj = flow_forward(batch.ensemble, u)
    _, grads = terminal_loss(traj.terminal, np.asarray(batch.labels)[:, None], targets)
    adj = flow_backward(traj, u, terminal_covector(traj.terminal, gamma, grads))
    res = pmp_residual(traj, adj, u, beta)
    fd = finite_difference_gradient(penalized_weighted_objective(batch, gamma, targets, beta), u, h)
    fd_norm = float(np.linalg.norm(fd))
    ratio = res / fd_norm if fd_norm > 0 else float("inf") if res > 0 else 1.0
    return SurrogateExtremalReport(res, fd_norm, ratio, threshold, bool(res < threshold and fd_norm < threshold))


def derivative_self_test(seed=0, n_draws=100, h=1e-6, tol=1e-6, d=2):
    """Finite-difference check of the field Jacobians, loss gradient and Hamiltonian gradient.

    Returns a dict of worst relative errors per check.
    """
    rng = np.random.default_rng(seed)
    worst = {"jacobian_state": 0.0, "jacobian_control": 0.0, "terminal_loss": 0.0,
             "hamiltonian_control_gradient": 0.0}
    targets = ClassTargets()
    for _ in range(n_draws):
        x = rng.uniform(-2, 2, d)
        omega = rng.uniform(-2, 2, d * d + d)
        u = ControlValue.from_flat(omega, d)
        fd = central_difference(lambda z: vector_field(z, u), x, h)
        worst["jacobian_state"] = max(worst["jacobian_state"], relative_error(jacobian_state(x, u), fd))
        fd = central_difference(lambda w: vector_field(x, ControlValue.from_flat(w, d)), omega, h)
        worst["jacobian_control"] = max(worst["jacobian_control"], relative_error(jacobian_control(x, u), fd))
        if d == 2:
            label = int(rng.integers(2))
            fd = central_difference(lambda z: terminal_loss(z, label, targets)[0], x, h)
            worst["terminal_loss"] = max(worst["terminal_loss"],
                                         relative_error(terminal_loss(x, label, targets)[1], fd))
        X = rng.uniform(-2, 2, (3, 2, d))
        P = rng.uniform(-2, 2, (3, 2, d))
        beta = float(rng.uniform(0, 1))
        fd = central_difference(lambda w: hamiltonian(X, P, ControlValue.from_flat(w, d), beta), omega, h)
        worst["hamiltonian_control_gradient"] = max(
            worst["hamiltonian_control_gradient"],
            relative_error(hamiltonian_control_gradient(X, P, u, beta), fd),
        )
    return {name: {"max_relative_error": err, "tolerance": tol, "passed": bool(err < tol)}
            for name, err in worst.items()}
