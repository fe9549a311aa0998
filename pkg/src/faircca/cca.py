"""Grouped two-view data and closed-form CCA via whitened SVD."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import (
    DegenerateDirection,
    EmptyGroup,
    GroupMismatch,
    NonFiniteInput,
    RankTooSmall,
    ShapeMismatch,
)
from .manifold import EIG_FLOOR, GramOperator, make_gram

DENOM_FLOOR = 1e-14


def inv_sqrt(b):
    """Symmetric inverse square root with eigenvalues floored at 1e-12."""
    w, q = la.eigh(0.5 * (b + b.T))
    w = np.maximum(w, EIG_FLOOR)
    return (q / np.sqrt(w)) @ q.T


@dataclass(frozen=True)
class GroupedDataset:
    """Paired views X (N x Dx) and Y (N x Dy) split into K groups.

    ``groups`` holds 0-based group codes; ``labels`` maps codes back to the
    original group labels.
    """

    X: np.ndarray
    Y: np.ndarray
    groups: np.ndarray
    labels: tuple = ()
    standardized: bool = False
    constant_x: tuple = ()
    constant_y: tuple = ()
    rows: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        g = np.asarray(self.groups)
        if X.ndim != 2 or Y.ndim != 2:
            raise ShapeMismatch("X and Y must be 2-D")
        if X.shape[0] != Y.shape[0] or g.shape != (X.shape[0],):
            raise ShapeMismatch(
                f"row counts differ: X {X.shape[0]}, Y {Y.shape[0]}, groups {g.shape}"
            )
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise NonFiniteInput("X and Y must be finite")
        if g.size and (g.min() < 0 or not np.issubdtype(g.dtype, np.integer)):
            raise ShapeMismatch("group codes must be nonnegative integers")
        k = int(g.max()) + 1 if g.size else 0
        rows = tuple(np.flatnonzero(g == i) for i in range(k))
        for i, r in enumerate(rows):
            if r.size == 0:
                raise EmptyGroup(f"group {i} has no rows")
        labels = tuple(self.labels) if self.labels else tuple(range(1, k + 1))
        if len(labels) != k:
            raise ShapeMismatch(f"{len(labels)} labels for {k} groups")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "groups", g.astype(int))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "rows", rows)

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def K(self):
        return len(self.rows)

    @property
    def dims(self):
        return self.X.shape[1], self.Y.shape[1]

    @property
    def sizes(self):
        return tuple(int(r.size) for r in self.rows)

    def group(self, k):
        """(X^k, Y^k) for 0-based group index k."""
        if not 0 <= k < self.K:
            raise GroupMismatch(f"group index {k} outside [0, {self.K})")
        r = self.rows[k]
        return self.X[r], self.Y[r]


def _zscore(m):
    m = np.asarray(m, dtype=float)
    mean = m.mean(axis=0)
    sd = m.std(axis=0, ddof=1)
    const = sd <= 1e-12 * np.maximum(1.0, np.abs(mean))
    out = (m - mean) / np.where(const, 1.0, sd)
    out[:, const] = 0.0
    return out, tuple(int(i) for i in np.flatnonzero(const))


def encode_groups(labels):
    """Map arbitrary labels to 0-based codes in first-appearance order."""
    order = {}
    codes = np.empty(len(labels), dtype=int)
    for i, lab in enumerate(labels):
        codes[i] = order.setdefault(lab, len(order))
    return codes, tuple(order)


def standardize(X, Y, group_labels):
    """Z-score every column with the sample (N-1) standard deviation.

    Constant columns become zeros and are listed in ``constant_x`` /
    ``constant_y``. Group labels are encoded in first-appearance order.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"incompatible views {X.shape} and {Y.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise NonFiniteInput("X and Y must not contain NaN or Inf")
    if X.shape[0] < 2:
        raise ShapeMismatch("need at least two rows to standardize")
    if len(group_labels) != X.shape[0]:
        raise ShapeMismatch("one group label per row is required")
    codes, labels = encode_groups(list(group_labels))
    xs, cx = _zscore(X)
    ys, cy = _zscore(Y)
    return GroupedDataset(xs, ys, codes, labels, True, cx, cy)


@dataclass(frozen=True)
class CcaSolution:
    U: np.ndarray
    V: np.ndarray
    rho: np.ndarray
    gram_x: GramOperator = field(repr=False)
    gram_y: GramOperator = field(repr=False)

    @property
    def R(self):
        return self.U.shape[1]


@dataclass(frozen=True)
class GroupOptimum:
    """Group-specific CCA optimum; ``local_value`` is the constant in E^k."""

    k: int
    U: np.ndarray
    V: np.ndarray
    rho: np.ndarray

    @property
    def local_value(self):
        return float(np.sum(self.rho))


def fix_signs(U, V):
    """Make the largest-magnitude entry of each u_r positive (v_r flipped jointly)."""
    U = U.copy()
    V = V.copy()
    for r in range(U.shape[1]):
        i = int(np.argmax(np.abs(U[:, r])))
        if U[i, r] < 0:
            U[:, r] *= -1.0
            V[:, r] *= -1.0
    return U, V


def solve_cca(X, Y, R, ridge=None):
    """Closed-form CCA on B_x = X^T X + eps I, B_y = Y^T Y + eps I.

    ``ridge`` is a scalar applied to both views, a pair (eps_x, eps_y), or
    None for the scale-aware default of each view.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"incompatible views {X.shape} and {Y.shape}")
    R = int(R)
    if R < 1 or R > min(X.shape[1], Y.shape[1]):
        raise RankTooSmall(f"R={R} must lie in [1, min(Dx, Dy)={min(X.shape[1], Y.shape[1])}]")
    rx, ry = ridge if isinstance(ridge, (tuple, list)) else (ridge, ridge)
    gx = make_gram(X, rx)
    gy = make_gram(Y, ry)
    wx = inv_sqrt(gx.B)
    wy = inv_sqrt(gy.B)
    p, s, qt = la.svd(wx @ (X.T @ Y) @ wy)
    U, V = fix_signs(wx @ p[:, :R], wy @ qt.T[:, :R])
    return CcaSolution(U, V, s[:R].copy(), gx, gy)


def solve_group_cca(data, R, ridge=None):
    """Per-group CCA optima, one GroupOptimum per group."""
    out = []
    for k in range(data.K):
        xk, yk = data.group(k)
        sol = solve_cca(xk, yk, R, ridge)
        out.append(GroupOptimum(k, sol.U, sol.V, sol.rho))
    return out


def correlation_profile(U, V, X, Y):
    """Columnwise correlations u_r^T X^T Y v_r / sqrt(u_r^T X^T X u_r * v_r^T Y^T Y v_r)."""
    xu = np.asarray(X, dtype=float) @ np.asarray(U, dtype=float)
    yv = np.asarray(Y, dtype=float) @ np.asarray(V, dtype=float)
    if xu.shape != yv.shape:
        raise ShapeMismatch(f"projected views have shapes {xu.shape} and {yv.shape}")
    num = np.einsum("ir,ir->r", xu, yv)
    den2 = np.einsum("ir,ir->r", xu, xu) * np.einsum("ir,ir->r", yv, yv)
    if np.any(den2 < DENOM_FLOOR**2):
        raise DegenerateDirection("a projected direction has (near) zero variance")
    return num / np.sqrt(den2)
