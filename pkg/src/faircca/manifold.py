"""Generalized Stiefel manifold St(D, R, B) = {Z : Z^T B Z = I_R}.

Provides the constraint Gram matrices, the tangent-space projection and the
generalized polar retraction used by both fair CCA optimizers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import FactorizationFailure, RankDeficientStep, ShapeMismatch

FEASIBILITY_TOL = 1e-8
EIG_FLOOR = 1e-12


def sym(a):
    return 0.5 * (a + a.T)


def default_ridge(m):
    """Scale-aware ridge: 1e-8 * trace(M^T M) / D."""
    m = np.asarray(m, dtype=float)
    return 1e-8 * float(np.sum(m * m)) / m.shape[1]


@dataclass(frozen=True)
class GramOperator:
    """SPD constraint matrix B = M^T M + ridge * I with a cached Cholesky factor."""

    B: np.ndarray
    ridge: float
    cho: tuple = field(repr=False, compare=False)

    @property
    def dim(self):
        return self.B.shape[0]

    def solve(self, rhs):
        return la.cho_solve(self.cho, rhs)

    def inv_sqrt(self):
        """B^{-1/2} via symmetric eigendecomposition, eigenvalues floored at 1e-12."""
        w, q = la.eigh(self.B)
        w = np.maximum(w, EIG_FLOOR)
        return (q / np.sqrt(w)) @ q.T


def gram_from_matrix(b, ridge=0.0):
    """Wrap an explicit SPD matrix (ridge is added to the diagonal)."""
    b = np.array(b, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ShapeMismatch(f"Gram matrix must be square, got {b.shape}")
    b = sym(b)
    if ridge:
        b = b + ridge * np.eye(b.shape[0])
    try:
        cho = la.cho_factor(b, lower=True)
    except la.LinAlgError as exc:
        raise FactorizationFailure(
            f"Gram matrix is not positive definite (ridge={ridge:g}); increase the ridge"
        ) from exc
    return GramOperator(B=b, ridge=float(ridge), cho=cho)


def make_gram(m, ridge=None):
    """Build B = M^T M + ridge * I for an N x D data matrix M.

    ``ridge=None`` selects the scale-aware default.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeMismatch(f"data matrix must be N x D with N, D >= 1, got {m.shape}")
    if ridge is None:
        ridge = default_ridge(m)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    return gram_from_matrix(m.T @ m, ridge)


def feasibility_residual(z, gram):
    """max-abs entry of Z^T B Z - I."""
    z = np.asarray(z, dtype=float)
    return float(np.max(np.abs(z.T @ gram.B @ z - np.eye(z.shape[1]))))


def tangent_residual(z, w, gram):
    a = z.T @ gram.B @ w
    return float(np.max(np.abs(a + a.T)))


def _check_shapes(z, w, gram):
    if z.ndim != 2 or z.shape[0] != gram.dim:
        raise ShapeMismatch(f"point has shape {z.shape}, Gram is {gram.dim}x{gram.dim}")
    if w.shape != z.shape:
        raise ShapeMismatch(f"tangent candidate {w.shape} does not match point {z.shape}")
    if z.shape[1] > z.shape[0]:
        raise ShapeMismatch(f"R={z.shape[1]} exceeds D={z.shape[0]}")


def project_tangent(z, w, gram, kind="frobenius"):
    """Projection of W onto T_Z St(D, R, B).

    ``kind="frobenius"`` (default) is the orthogonal projection in the
    Frobenius inner product. The normal space at Z is {B Z S : S symmetric};
    S solves the Lyapunov equation A S + S A = Z^T B W + W^T B Z with
    A = (BZ)^T (BZ). This is the projection that makes Euclidean gradients
    vanish exactly at constrained stationary points.

    ``kind="oblique"`` returns W - Z sym(Z^T B W). It is also a projection
    onto the tangent space, but along span{Z S}; applied to a Euclidean
    gradient it is generally nonzero at stationary points.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_shapes(z, w, gram)
    if kind == "oblique":
        return w - z @ sym(z.T @ gram.B @ w)
    if kind != "frobenius":
        raise ValueError(f"unknown projection kind {kind!r}")
    bz = gram.B @ z
    a = bz.T @ bz
    rhs = bz.T @ w
    rhs = rhs + rhs.T
    # A is SPD, so the Lyapunov solve is diagonal in A's eigenbasis.
    lam, q = la.eigh(a)
    s = q @ ((q.T @ rhs @ q) / (lam[:, None] + lam[None, :])) @ q.T
    return w - bz @ sym(s)


def retract_gpolar(z, xi, eta, gram):
    """Generalized polar retraction of the moved point A = Z + eta * xi.

    With the thin SVD A = Ub S Vb^T and Ub^T B Ub = Q L Q^T the result is
    Ub Q L^{-1/2} Q^T Vb^T, which satisfies result^T B result = I.
    """
    if eta < 0:
        raise ValueError("step length must be nonnegative")
    z = np.asarray(z, dtype=float)
    xi = np.asarray(xi, dtype=float)
    _check_shapes(z, xi, gram)
    a = z + eta * xi
    ub, sv, vbt = la.svd(a, full_matrices=False)
    lam, q = la.eigh(ub.T @ gram.B @ ub)
    if sv[-1] <= EIG_FLOOR * max(sv[0], 1.0) or lam[0] < EIG_FLOOR:
        raise RankDeficientStep(
            f"moved point is rank deficient (min eigenvalue {lam[0]:.3e}); shrink the step"
        )
    return ub @ ((q / np.sqrt(lam)) @ q.T) @ vbt


def random_feasible(shape, gram, rng):
    """Gaussian matrix B-orthonormalized by the polar retraction."""
    return retract_gpolar(np.zeros(shape), rng.standard_normal(shape), 1.0, gram)
