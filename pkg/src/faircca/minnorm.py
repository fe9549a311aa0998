"""Min-norm point of a convex hull, solved over the simplex.

Given vectors g_1..g_M, find weights mu on the probability simplex minimizing
||sum_i mu_i g_i||^2. Only the Gram matrix G_ij = <g_i, g_j> is needed, so the
solver works for any inner product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import nnls

from .errors import SubproblemNotConverged

DUAL_GAP_TOL = 1e-12
MAX_ITER = 10_000


@dataclass(frozen=True)
class SimplexWeights:
    mu: np.ndarray
    gap: float
    iterations: int

    def __post_init__(self):
        if np.any(self.mu < 0) or abs(self.mu.sum() - 1.0) > 1e-12:
            raise ValueError("weights are not on the simplex")


def _dual_gap(gram, mu):
    grad = gram @ mu
    return float(mu @ grad - grad.min())


def _closed_form_pair(gram):
    g11, g12, g22 = gram[0, 0], gram[0, 1], gram[1, 1]
    denom = g11 + g22 - 2.0 * g12
    if denom <= 1e-300:
        gamma = 0.5
    else:
        gamma = float(np.clip((g22 - g12) / denom, 0.0, 1.0))
    return np.array([gamma, 1.0 - gamma])


def _polish(gram, support):
    """Solve the equality-constrained QP restricted to `support` exactly.

    Returns None when the KKT solution leaves the simplex.
    """
    idx = np.flatnonzero(support)
    m = idx.size
    kkt = np.zeros((m + 1, m + 1))
    kkt[:m, :m] = gram[np.ix_(idx, idx)]
    kkt[:m, m] = 1.0
    kkt[m, :m] = 1.0
    rhs = np.zeros(m + 1)
    rhs[m] = 1.0
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:m]
    if np.any(sol < -1e-14) or not np.all(np.isfinite(sol)):
        return None
    mu = np.zeros(gram.shape[0])
    mu[idx] = np.clip(sol, 0.0, None)
    total = mu.sum()
    if total <= 0:
        return None
    return mu / total


def _nnls_weights(gram):
    """Exact simplex weights through nonnegative least squares.

    With G = F^T F, minimizing ||F lam||^2 + (1^T lam - 1)^2 over lam >= 0
    gives lam = mu / (1 + ||F mu||^2) for the min-norm weights mu, so
    normalizing lam recovers mu. Lawson-Hanson is a finite active-set method.
    """
    w, q = la.eigh(gram)
    f = (q * np.sqrt(np.clip(w, 0.0, None))).T
    m = gram.shape[0]
    a = np.vstack([f, np.ones((1, m))])
    b = np.zeros(m + 1)
    b[m] = 1.0
    try:
        lam, _ = nnls(a, b, maxiter=50 * m)
    except RuntimeError:
        return None
    total = lam.sum()
    return lam / total if total > 0 else None


def _frank_wolfe(gram, abs_tol, max_iter):
    """Frank-Wolfe with away steps and exact line search, plus KKT polishing."""
    m = gram.shape[0]
    mu = np.zeros(m)
    mu[int(np.argmin(np.diag(gram)))] = 1.0
    for it in range(1, max_iter + 1):
        grad = gram @ mu
        toward = int(np.argmin(grad))
        gap = float(mu @ grad - grad[toward])
        if gap <= abs_tol:
            return mu, it

        polished = _polish(gram, (mu > 0) | (np.arange(m) == toward))
        if polished is not None and _dual_gap(gram, polished) <= abs_tol:
            return polished, it

        active = np.flatnonzero(mu > 0)
        away = int(active[np.argmax(grad[active])])
        d_fw = -mu.copy()
        d_fw[toward] += 1.0
        d_aw = mu.copy()
        d_aw[away] -= 1.0
        if -(grad @ d_fw) >= -(grad @ d_aw):
            direction, step_max = d_fw, 1.0
        else:
            w = mu[away]
            direction, step_max = d_aw, (w / (1.0 - w) if w < 1.0 else np.inf)
        slope = float(grad @ direction)
        curv = float(direction @ gram @ direction)
        step = step_max if curv <= 0 else min(step_max, -slope / curv)
        mu = np.clip(mu + step * direction, 0.0, None)
        mu /= mu.sum()
    return mu, max_iter


def solve_min_norm(gram, tol=DUAL_GAP_TOL, max_iter=MAX_ITER):
    """Minimize 0.5 * mu^T G mu over the probability simplex.

    The exact solution comes from a nonnegative least-squares reformulation;
    should its dual gap miss the tolerance, Frank-Wolfe with away steps and
    exact line search takes over. The tolerance is on
    the Frank-Wolfe dual gap mu^T G mu - min_i (G mu)_i, relative to
    max(1, max_i G_ii).
    """
    gram = np.asarray(gram, dtype=float)
    gram = 0.5 * (gram + gram.T)
    m = gram.shape[0]
    if m == 0:
        raise ValueError("need at least one gradient")
    if m == 1:
        return SimplexWeights(np.ones(1), 0.0, 0)
    abs_tol = tol * max(1.0, float(np.max(np.diag(gram))))
    if m == 2:
        mu = _closed_form_pair(gram)
        return SimplexWeights(mu, max(_dual_gap(gram, mu), 0.0), 0)

    mu, it = _nnls_weights(gram), 1
    if mu is None or _dual_gap(gram, mu) > abs_tol:
        mu, it = _frank_wolfe(gram, abs_tol, max_iter)
    mu = np.clip(mu, 0.0, None)
    mu /= mu.sum()
    gap = _dual_gap(gram, mu)
    if gap <= abs_tol:
        return SimplexWeights(mu, max(gap, 0.0), it)
    raise SubproblemNotConverged(
        f"min-norm dual gap {gap:.3e} above {abs_tol:.3e} after {max_iter} iterations"
    )
