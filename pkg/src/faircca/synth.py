"""Synthetic two-view Gaussian data with planted canonical structure and K subgroups.

Group k draws (X^k, Y^k) from a joint Gaussian whose cross-covariance is
Sigma_XY = Sigma_X U diag(rho^(k)) V^T Sigma_Y, where U = Q_X R_X and
V = Q_Y R_Y are the group's perturbed canonical directions and

    Sigma_X = Q_X R_X^{-T} R_X^{-1} Q_X^T + tau_x T_X (I - Q_X Q_X^T) T_X^T.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as la

from .cca import GroupedDataset, standardize
from .errors import ConfigError, EmptyGroup, JointNotPSD

PSD_TOL = 1e-8
PSD_RETRIES = 10
JITTER = 1e-10
BENCHMARK_SIZES = (300, 350, 400, 450, 500)


def default_rhos(K, R, spread=0.4):
    """Linearly spaced per-dimension correlations, one row per group.

    Dimension r spans [hi_r - spread, hi_r] with hi_r = 0.9 - 0.1 (r - 1),
    clipped into (0, 1).
    """
    rows = np.empty((K, R))
    for r in range(R):
        hi = max(0.9 - 0.1 * r, 0.1)
        lo = max(hi - spread, 0.05)
        rows[:, r] = np.linspace(lo, hi, K) if K > 1 else hi
    return rows


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of the synthetic generator.

    ``projection_scale`` multiplies the unit-norm ground-truth directions;
    with standard-normal T_X the joint covariance is only PSD when the
    directions are short. The T_X cross term grows like D, so the default
    (None) is 0.1 * sqrt(20 / D) per view. ``sigma_g`` is the per-group
    perturbation applied in unit-norm coordinates.
    """

    Dx: int = 20
    Dy: int = 20
    R: int = 2
    sizes: tuple = BENCHMARK_SIZES
    rhos: tuple | None = None
    sigma_g: float = 0.1
    tau_x: float = 1.0
    tau_y: float = 0.001
    projection_scale: float | None = None
    seed: int = 0
    mean_x: float = 0.0
    mean_y: float = 0.0
    U_star: np.ndarray | None = field(default=None, compare=False, repr=False)
    V_star: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        if not self.sizes:
            raise ConfigError("need at least one group")
        if self.R < 1 or self.R > min(self.Dx, self.Dy):
            raise ConfigError(f"R={self.R} must lie in [1, min(Dx, Dy)]")
        if self.tau_x <= 0 or self.tau_y <= 0:
            raise ConfigError("tau_x and tau_y must be positive")
        if self.sigma_g < 0 or (self.projection_scale is not None and self.projection_scale <= 0):
            raise ConfigError("sigma_g must be >= 0 and projection_scale > 0")
        rhos = default_rhos(self.K, self.R) if self.rhos is None else np.asarray(self.rhos, float)
        if rhos.shape != (self.K, self.R):
            raise ConfigError(f"rhos must have shape (K, R)=({self.K}, {self.R})")
        if np.any(rhos <= 0) or np.any(rhos >= 1):
            raise ConfigError("planted correlations must lie in (0, 1)")
        object.__setattr__(self, "rhos", tuple(tuple(float(x) for x in row) for row in rhos))

    @property
    def K(self):
        return len(self.sizes)

    def scale_for(self, D):
        if self.projection_scale is not None:
            return float(self.projection_scale)
        return 0.1 * np.sqrt(20.0 / D)

    def to_dict(self):
        d = asdict(self)
        d.pop("U_star")
        d.pop("V_star")
        d["sizes"] = list(self.sizes)
        d["rhos"] = [list(r) for r in self.rhos]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown synth fields: {sorted(unknown)}")
        if d.get("rhos") is not None:
            d["rhos"] = tuple(tuple(r) for r in d["rhos"])
        return cls(**d)


def benchmark_profile(seed=0, R=2, D=20):
    """K = 5 groups of 300..500 rows, Dx = Dy = 20, R = 2."""
    return SynthSpec(Dx=D, Dy=D, R=R, sizes=BENCHMARK_SIZES, seed=seed)


@dataclass(frozen=True)
class PlantedCovariance:
    Sigma_X: np.ndarray
    Sigma_Y: np.ndarray
    Sigma_XY: np.ndarray
    Q_X: np.ndarray
    R_X: np.ndarray
    Q_Y: np.ndarray
    R_Y: np.ndarray

    @property
    def joint(self):
        return np.block([[self.Sigma_X, self.Sigma_XY], [self.Sigma_XY.T, self.Sigma_Y]])

    def min_eigenvalue(self):
        return float(la.eigvalsh(self.joint)[0])


def _view_cov(q, r, t, tau):
    rinv = la.solve_triangular(r, np.eye(r.shape[0]))
    proj = np.eye(q.shape[0]) - q @ q.T
    s = q @ rinv.T @ rinv @ q.T + tau * t @ proj @ t.T
    return 0.5 * (s + s.T)


def build_covariance(U, V, rho, T_X, T_Y, tau_x=1.0, tau_y=0.001, check=True):
    """Planted covariance for one group; raises JointNotPSD if check fails."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    qx, rx = la.qr(U, mode="economic")
    qy, ry = la.qr(V, mode="economic")
    sx = _view_cov(qx, rx, T_X, tau_x)
    sy = _view_cov(qy, ry, T_Y, tau_y)
    sxy = sx @ U @ np.diag(np.asarray(rho, dtype=float)) @ V.T @ sy
    cov = PlantedCovariance(sx, sy, sxy, qx, rx, qy, ry)
    if check:
        lo = cov.min_eigenvalue()
        if lo < -PSD_TOL:
            raise JointNotPSD(f"joint covariance has eigenvalue {lo:.3e} < -{PSD_TOL:g}")
    return cov


def population_correlations(cov, R=None):
    """Canonical correlations of a covariance triple via whitened SVD."""
    def isq(s):
        w, q = la.eigh(s)
        return (q / np.sqrt(np.maximum(w, 1e-300))) @ q.T

    s = la.svd(isq(cov.Sigma_X) @ cov.Sigma_XY @ isq(cov.Sigma_Y), compute_uv=False)
    return s if R is None else s[:R]


def sample_group(cov, n, rng, mean_x=0.0, mean_y=0.0):
    """n i.i.d. rows from N([mu_X; mu_Y], joint covariance)."""
    if n < 1:
        raise EmptyGroup("a group needs at least one observation")
    joint = cov.joint if isinstance(cov, PlantedCovariance) else np.asarray(cov, dtype=float)
    d = joint.shape[0]
    try:
        L = la.cholesky(joint, lower=True)
    except la.LinAlgError:
        try:
            L = la.cholesky(joint + JITTER * np.eye(d), lower=True)
        except la.LinAlgError as exc:
            raise JointNotPSD("joint covariance is not PSD even with jitter") from exc
    z = rng.standard_normal((n, d)) @ L.T
    dx = cov.Sigma_X.shape[0] if isinstance(cov, PlantedCovariance) else d // 2
    return z[:, :dx] + mean_x, z[:, dx:] + mean_y


def _stream(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=key))


def ground_truth(spec):
    """Unit-norm orthonormal U*, V* (unless supplied in the spec)."""
    rng = _stream(spec.seed, 0)
    u = spec.U_star
    v = spec.V_star
    if u is None:
        u = la.qr(rng.standard_normal((spec.Dx, spec.R)), mode="economic")[0]
    if v is None:
        v = la.qr(rng.standard_normal((spec.Dy, spec.R)), mode="economic")[0]
    return np.asarray(u, dtype=float), np.asarray(v, dtype=float)


def group_covariance(spec, k):
    """Planted covariance of group k (0-based); resamples T until PSD."""
    u0, v0 = ground_truth(spec)
    rng = _stream(spec.seed, 1, k)
    u = u0 + spec.sigma_g * rng.standard_normal(u0.shape)
    v = v0 + spec.sigma_g * rng.standard_normal(v0.shape)
    u = spec.scale_for(spec.Dx) * la.qr(u, mode="economic")[0]
    v = spec.scale_for(spec.Dy) * la.qr(v, mode="economic")[0]
    rho = spec.rhos[k]
    last = None
    for attempt in range(PSD_RETRIES):
        # T_X, T_Y are shared by all groups; a group draws its own only
        # when the shared pair fails the PSD check.
        trng = _stream(spec.seed, 2) if attempt == 0 else _stream(spec.seed, 2, k, attempt)
        tx = trng.standard_normal((spec.Dx, spec.Dx))
        ty = trng.standard_normal((spec.Dy, spec.Dy))
        try:
            return build_covariance(u, v, rho, tx, ty, spec.tau_x, spec.tau_y)
        except JointNotPSD as exc:
            last = exc
    raise JointNotPSD(f"group {k}: no PSD covariance after {PSD_RETRIES} draws ({last})")


def make_synthetic_raw(spec):
    """Unstandardized (X, Y, group labels 1..K) for a spec."""
    xs, ys, labels = [], [], []
    for k, n in enumerate(spec.sizes):
        if n < 1:
            raise EmptyGroup(f"group {k + 1} has N_k = {n}")
        cov = group_covariance(spec, k)
        x, y = sample_group(cov, n, _stream(spec.seed, 3, k), spec.mean_x, spec.mean_y)
        xs.append(x)
        ys.append(y)
        labels.extend([k + 1] * n)
    return np.vstack(xs), np.vstack(ys), labels


def make_synthetic_grouped(spec) -> GroupedDataset:
    """Sample every group, concatenate and standardize."""
    x, y, labels = make_synthetic_raw(spec)
    return standardize(x, y, labels)
