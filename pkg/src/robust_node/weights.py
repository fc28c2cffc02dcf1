"""Per-particle weights over perturbations (rows on the probability simplex)."""

import numpy as np

SIMPLEX_TOL = 1e-12
TIE_TOL = 1e-12


def uniform_weights(M, N):
    if M < 1 or N < 1:
        raise ValueError(f"M and N must be >= 1, got M={M}, N={N}")
    return np.full((M, N), 1.0 / N)


def gibbs_weights(losses, c=100.0):
    """Row-wise softmax of ``c * losses``.

    The row maximum is subtracted before exponentiating; with ``c = 100`` and
    losses of order one the naive exponentials overflow.
    """
    if c < 0:
        raise ValueError(f"temperature c must be >= 0, got {c}")
    z = c * np.asarray(losses, dtype=float)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def worst_case_weights(losses, tie_tol=TIE_TOL):
    """All mass on the row argmax; near-ties (within ``tie_tol``) share it equally."""
    losses = np.asarray(losses, dtype=float)
    top = losses >= losses.max(axis=1, keepdims=True) - tie_tol
    return top / top.sum(axis=1, keepdims=True)


def check_weight_matrix(gamma, shape=None, tol=SIMPLEX_TOL):
    """Raise ``ValueError`` unless every row of ``gamma`` lies on the simplex."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2:
        raise ValueError(f"weight matrix must be 2-D, got shape {gamma.shape}")
    if shape is not None and gamma.shape != tuple(shape):
        raise ValueError(f"weight matrix shape {gamma.shape} != expected {tuple(shape)}")
    if not np.all(np.isfinite(gamma)) or np.any(gamma < 0):
        raise ValueError("weights must be finite and nonnegative")
    bad = np.flatnonzero(np.abs(gamma.sum(axis=1) - 1.0) > tol)
    if bad.size:
        raise ValueError(f"rows {bad.tolist()[:5]} do not sum to 1")
    return gamma


def row_entropy(gamma):
    g = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(g > 0, -g * np.log(g), 0.0)
    return terms.sum(axis=1)


def make_weights(scheme, losses, c=100.0):
    """Dispatch on ``scheme`` in {"uniform", "gibbs", "worst_case"}."""
    losses = np.asarray(losses, dtype=float)
    if scheme == "uniform":
        return uniform_weights(*losses.shape)
    if scheme == "gibbs":
        return gibbs_weights(losses, c)
    if scheme == "worst_case":
        return worst_case_weights(losses)
    raise ValueError(f"unknown weight scheme {scheme!r}")
