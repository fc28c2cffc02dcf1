"""Terminal covectors, the backward adjoint sweep, and the resulting control gradient.

Covectors are stored with the same ``(M, N, d)`` layout as the states.  The
backward recursion is the exact adjoint of the forward Euler scheme::

    P_L     = -(1/M) * gamma * grad g(X_L)
    P_n     = P_{n+1} + dt * J_x(X_n, u_n)^T P_{n+1}

so the gradient of the discrete weighted objective with respect to ``u_n``
pairs ``X_n`` with ``P_{n+1}``.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import ControlSchedule, TimeGrid, Trajectory, hamiltonian_control_gradient
from .exceptions import NumericalAbort


@dataclass
class AdjointTrajectory:
    grid: TimeGrid
    covectors: np.ndarray

    @property
    def terminal(self):
        return self.covectors[-1]


def terminal_covector(XT, gamma, loss_gradients):
    """``p_ij(T) = -(1/M) gamma_ij grad g_i(x_ij(T))``."""
    XT = np.asarray(XT, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    loss_gradients = np.asarray(loss_gradients, dtype=float)
    if loss_gradients.shape != XT.shape or gamma.shape != XT.shape[:2]:
        raise ValueError(
            f"shape mismatch: XT{XT.shape}, gamma{gamma.shape}, gradients{loss_gradients.shape}"
        )
    M = XT.shape[0]
    return -(gamma[..., None] * loss_gradients) / M


def flow_backward(traj: Trajectory, u: ControlSchedule, PT) -> AdjointTrajectory:
    PT = np.asarray(PT, dtype=float)
    if PT.shape != traj.terminal.shape:
        raise ValueError(f"terminal covector shape {PT.shape} != state shape {traj.terminal.shape}")
    if traj.grid != u.grid:
        raise ValueError("trajectory and control schedule use different time grids")
    L = u.grid.n_nodes
    dt = u.grid.step
    P = np.empty_like(traj.states)
    P[L] = PT
    for n in range(L - 1, -1, -1):
        x = traj.states[n]
        W, b = u[n]
        s = 1.0 - np.tanh((x[..., None, :] * W).sum(axis=-1) + b) ** 2
        # (diag(s) W)^T p = W^T (s * p)
        P[n] = P[n + 1] + dt * ((s * P[n + 1])[..., :, None] * W).sum(axis=-2)
        if not np.all(np.isfinite(P[n])):
            raise NumericalAbort("non-finite covector in backward flow", node=n)
    return AdjointTrajectory(u.grid, P)


def hamiltonian_gradients(traj: Trajectory, adj: AdjointTrajectory, u: ControlSchedule, beta=0.0):
    """``grad_omega H_beta(X_n, P_{n+1}, u_n)`` for every node, shape ``(L, m)``."""
    return np.stack([
        hamiltonian_control_gradient(traj.states[n], adj.covectors[n + 1], u[n], beta)
        for n in range(u.grid.n_nodes)
    ])


def weighted_objective_gradient(traj, adj, u, beta=0.0):
    """Gradient of ``J_Gamma(u) + beta * dt * sum_n |u_n|^2`` per node, shape ``(L, m)``."""
    return -u.grid.step * hamiltonian_gradients(traj, adj, u, beta)
