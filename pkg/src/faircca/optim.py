"""MF-CCA (multi-objective) and SF-CCA (penalized) fitting on generalized Stiefel manifolds.

Both fits run in sample-covariance units: the data are scaled by
1/sqrt(N-1) so the constraint reads U^T C_xx U = I with C_xx a correlation
matrix. Objective values, metrics and the returned (U, V) are expressed in
the original scaling U^T X^T X U = I; only step lengths and direction norms
are measured in the scaled coordinates, which keeps step sizes independent
of the sample size.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .cca import solve_cca, solve_group_cca
from .errors import ConfigError, FeasibilityError, RankDeficientStep
from .fairness import PenaltyKind, fairness_report
from .manifold import (
    FEASIBILITY_TOL,
    feasibility_residual,
    gram_from_matrix,
    make_gram,
    project_tangent,
    random_feasible,
    retract_gpolar,
)
from .minnorm import solve_min_norm

METHODS = ("cca", "mf_cca", "sf_cca")
DEFAULT_ETA0 = {"mf_cca": 4e-1, "sf_cca": 2e-2, "cca": 1.0}
DEFAULT_INIT = {"mf_cca": "random_feasible", "sf_cca": "global_cca", "cca": "global_cca"}


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "sf_cca"
    R: int = 2
    eta0: float | None = None
    lam: float = 10.0
    T_max: int = 1000
    stop_tol: float = 1e-4
    penalty: str = "absolute"
    ridge: float | None = None
    seed: int = 0
    init: str | None = None
    update: str = "simultaneous"
    step_schedule: str = "sqrt"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        object.__setattr__(self, "penalty", PenaltyKind.parse(self.penalty).value)
        if self.eta0 is None:
            object.__setattr__(self, "eta0", DEFAULT_ETA0[self.method])
        if self.init is None:
            object.__setattr__(self, "init", DEFAULT_INIT[self.method])
        if not self.eta0 > 0:
            raise ConfigError("eta0 must be positive")
        if self.lam < 0:
            raise ConfigError("lambda must be nonnegative")
        if int(self.T_max) < 1:
            raise ConfigError("T_max must be at least 1")
        if not self.stop_tol > 0:
            raise ConfigError("stop_tol must be positive")
        if int(self.R) < 1:
            raise ConfigError("R must be at least 1")
        if self.ridge is not None and self.ridge < 0:
            raise ConfigError("ridge must be nonnegative")
        if self.init not in ("global_cca", "random_feasible"):
            raise ConfigError(f"unknown init {self.init!r}")
        if self.update not in ("simultaneous", "sequential"):
            raise ConfigError(f"unknown update order {self.update!r}")
        if self.step_schedule not in ("sqrt", "constant"):
            raise ConfigError(f"unknown step schedule {self.step_schedule!r}")

    def to_dict(self):
        d = asdict(self)
        if d["stop_tol"] == float("inf"):
            d["stop_tol"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("stop_tol") == "inf":
            d["stop_tol"] = float("inf")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown optimizer fields: {sorted(unknown)}")
        return cls(**d)


def step_size(t, eta0, schedule="sqrt"):
    """eta_t = eta0 / sqrt(t + 1) (or eta0 for the constant schedule)."""
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    return eta0 if schedule == "constant" else eta0 / np.sqrt(t + 1.0)


@dataclass
class IterateTrace:
    objectives: list = field(default_factory=list)
    direction_norm: list = field(default_factory=list)
    running_min_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    feasibility: list = field(default_factory=list)
    optimality_residual: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)

    def __len__(self):
        return len(self.direction_norm)

    def record(self, objectives, norm, step, feas, resid, elapsed):
        self.objectives.append(np.atleast_1d(np.asarray(objectives, dtype=float)).copy())
        self.direction_norm.append(float(norm))
        prev = self.running_min_norm[-1] if self.running_min_norm else np.inf
        self.running_min_norm.append(min(prev, float(norm)))
        self.step.append(float(step))
        self.feasibility.append(float(feas))
        self.optimality_residual.append(float(resid))
        self.elapsed.append(float(elapsed))


class FairProblem:
    """Objectives f_1 = -tr(U^T X^T Y V) and pairwise disparities, with gradients.

    Built from cross-product matrices, so the same object serves the original
    and the covariance-scaled coordinates.
    """

    def __init__(self, cross, group_cross, local_values, penalty):
        self.C = np.asarray(cross, dtype=float)
        self.Ck = [np.asarray(c, dtype=float) for c in group_cross]
        self.local = np.asarray(local_values, dtype=float)
        self.penalty = PenaltyKind.parse(penalty)
        K = len(self.Ck)
        self.pairs = [(k, s) for k in range(K) for s in range(k + 1, K)]

    @classmethod
    def from_data(cls, data, optima, penalty, scale=1.0):
        c2 = scale * scale
        cross = c2 * (data.X.T @ data.Y)
        gc = []
        for k in range(data.K):
            xk, yk = data.group(k)
            gc.append(c2 * (xk.T @ yk))
        return cls(cross, gc, [o.local_value for o in optima], penalty)

    @property
    def M(self):
        return 1 + len(self.pairs)

    def errors(self, U, V):
        return np.array([lv - np.sum(U * (c @ V)) for lv, c in zip(self.local, self.Ck)])

    def mf_values(self, U, V):
        e = self.errors(U, V)
        f1 = -np.sum(U * (self.C @ V))
        d = [self.penalty.phi(e[k] - e[s]) for k, s in self.pairs]
        return np.array([f1, *d], dtype=float)

    def sf_value(self, U, V, lam):
        f = self.mf_values(U, V)
        return float(f[0] + lam * np.sum(f[1:]))

    def mf_gradients(self, U, V):
        """Euclidean gradient pairs (dU, dV) of f_1 and every Delta^{k,s}.

        The constant local value in E^k has zero derivative, so
        dE^k/dU = -X^k^T Y^k V and dE^k/dV = -Y^k^T X^k U.
        """
        e = self.errors(U, V)
        cv = [c @ V for c in self.Ck]
        ctu = [c.T @ U for c in self.Ck]
        grads = [(-(self.C @ V), -(self.C.T @ U))]
        for k, s in self.pairs:
            w = float(self.penalty.dphi(e[k] - e[s]))
            grads.append((w * (cv[s] - cv[k]), w * (ctu[s] - ctu[k])))
        return grads

    def sf_gradient(self, U, V, lam):
        grads = self.mf_gradients(U, V)
        gu = grads[0][0] + lam * sum((g[0] for g in grads[1:]), np.zeros_like(U))
        gv = grads[0][1] + lam * sum((g[1] for g in grads[1:]), np.zeros_like(V))
        return gu, gv


def _problem(data, optima, penalty):
    return FairProblem.from_data(data, optima, penalty)


def mf_objectives(U, V, data, optima, penalty):
    """Objective vector F = (f_1, Delta^{k,s} for k < s)."""
    return _problem(data, optima, penalty).mf_values(U, V)


def sf_objective(U, V, data, optima, lam, penalty):
    return _problem(data, optima, penalty).sf_value(U, V, lam)


def objective_gradients_mf(U, V, data, optima, penalty):
    """Euclidean gradients of the M = 1 + K(K-1)/2 MF-CCA objectives."""
    return _problem(data, optima, penalty).mf_gradients(U, V)


def sf_cca_objective_gradient(U, V, data, optima, lam, penalty):
    """Euclidean gradient of f_1 + lam * sum_{k<s} Delta^{k,s}."""
    return _problem(data, optima, penalty).sf_gradient(U, V, lam)


def _flatten(pair):
    return np.concatenate([np.ravel(p) for p in pair])


def min_norm_direction(gradients):
    """Common descent direction P = -sum mu_i g_i of minimal norm.

    ``gradients`` is a list of tangent vectors, each a tuple of blocks (for
    example (G^u, G^v)); the joint norm is the Frobenius norm over all blocks.
    Returns (P, weights, optimality residual max_i <P, g_i> + ||P||^2).
    """
    flat = np.array([_flatten(g) for g in gradients])
    gram = flat @ flat.T
    w = solve_min_norm(gram)
    p_flat = -(w.mu @ flat)
    p = []
    offset = 0
    for block in gradients[0]:
        n = np.size(block)
        p.append(p_flat[offset:offset + n].reshape(np.shape(block)))
        offset += n
    sq = float(p_flat @ p_flat)
    resid = float(np.max(flat @ p_flat) + sq)
    return tuple(p), w, resid


@dataclass
class FairCcaResult:
    U: np.ndarray
    V: np.ndarray
    config: OptimizerConfig
    report: object
    optima: list = field(repr=False)
    trace: IterateTrace = field(repr=False)
    iterations: int = 0
    converged: bool = False
    seconds: float = 0.0
    max_feasibility: float = 0.0


class _Geometry:
    """Covariance-scaled constraint matrices for one dataset."""

    def __init__(self, data, ridge):
        self.scale = 1.0 / np.sqrt(max(data.N - 1, 1))
        gx = make_gram(data.X, ridge)
        gy = make_gram(data.Y, ridge)
        c2 = self.scale**2
        self.gx = gram_from_matrix(c2 * gx.B)
        self.gy = gram_from_matrix(c2 * gy.B)

    def to_internal(self, U):
        return U / self.scale

    def to_external(self, U):
        return U * self.scale


def _initial_point(data, config, geom):
    if config.init == "global_cca":
        sol = solve_cca(data.X, data.Y, config.R, config.ridge)
        return geom.to_internal(sol.U), geom.to_internal(sol.V)
    rng = np.random.default_rng(config.seed)
    shape_u = (data.X.shape[1], config.R)
    shape_v = (data.Y.shape[1], config.R)
    return random_feasible(shape_u, geom.gx, rng), random_feasible(shape_v, geom.gy, rng)


def _direction(kind, blocks, config):
    """Descent direction and optimality residual from projected gradients.

    ``blocks`` is a list of per-objective tuples; for SF-CCA it holds the
    projected composite gradient only.
    """
    if kind == "sf_cca":
        p = tuple(-b for b in blocks[0])
        return p, 0.0
    # Gradients that vanish identically (absolute penalty at a tie) are
    # already optimal for their pair and would otherwise force P = 0.
    active = [blocks[0]] + [b for b in blocks[1:] if any(np.any(x) for x in b)]
    p, _, resid = min_norm_direction(active)
    return p, resid


def _retract(z, xi, eta, gram, t, name):
    try:
        out = retract_gpolar(z, xi, eta, gram)
    except RankDeficientStep as exc:
        raise RankDeficientStep(f"iteration {t}, {name}: {exc}") from exc
    feas = feasibility_residual(out, gram)
    if not feas <= FEASIBILITY_TOL:
        raise FeasibilityError(
            f"iteration {t}, {name}: feasibility residual {feas:.3e} exceeds {FEASIBILITY_TOL:g}"
        )
    return out, feas


def _fit(data, config, optima=None):
    t_start = time.perf_counter()
    if optima is None:
        optima = solve_group_cca(data, config.R, config.ridge)
    geom = _Geometry(data, config.ridge)
    prob = FairProblem.from_data(data, optima, config.penalty, geom.scale)
    U, V = _initial_point(data, config, geom)
    lam = config.lam
    method = config.method
    trace = IterateTrace()
    max_feas = max(feasibility_residual(U, geom.gx), feasibility_residual(V, geom.gy))

    def projected(U, V, which=(0, 1)):
        if method == "sf_cca":
            grads = [prob.sf_gradient(U, V, lam)]
        else:
            grads = prob.mf_gradients(U, V)
        pts = (U, V)
        grams = (geom.gx, geom.gy)
        return [tuple(project_tangent(pts[i], g[i], grams[i]) for i in which) for g in grads]

    def values(U, V):
        if method == "sf_cca":
            return prob.sf_value(U, V, lam)
        return prob.mf_values(U, V)

    converged = False
    iterations = 0
    for t in range(int(config.T_max) + 1):
        eta = step_size(t, config.eta0, config.step_schedule)
        feas = max(feasibility_residual(U, geom.gx), feasibility_residual(V, geom.gy))
        if config.update == "simultaneous":
            (pu, pv), resid = _direction(method, projected(U, V), config)
            norm = np.sqrt(np.sum(pu * pu) + np.sum(pv * pv))
        else:
            (pu,), resid = _direction(method, projected(U, V, (0,)), config)
            norm = np.sqrt(np.sum(pu * pu))
            pv = None
        trace.record(values(U, V), norm, eta, feas, resid, time.perf_counter() - t_start)
        if norm < config.stop_tol and config.update == "simultaneous":
            converged = True
            break
        if t == config.T_max:
            break
        if config.update == "simultaneous":
            U_new, fu = _retract(U, pu, eta, geom.gx, t, "U")
            V, fv = _retract(V, pv, eta, geom.gy, t, "V")
            U = U_new
        else:
            U_cand, fu = _retract(U, pu, eta, geom.gx, t, "U")
            (pv,), resid_v = _direction(method, projected(U_cand, V, (1,)), config)
            full = np.sqrt(norm**2 + np.sum(pv * pv))
            trace.direction_norm[-1] = float(full)
            trace.running_min_norm[-1] = min(
                trace.running_min_norm[-2] if len(trace) > 1 else np.inf, float(full)
            )
            if full < config.stop_tol:
                converged = True
                break
            U = U_cand
            V, fv = _retract(V, pv, eta, geom.gy, t, "V")
        max_feas = max(max_feas, fu, fv)
        iterations += 1

    U_out, V_out = geom.to_external(U), geom.to_external(V)
    seconds = time.perf_counter() - t_start
    report = fairness_report(U_out, V_out, data, optima)
    return FairCcaResult(U_out, V_out, config, report, optima, trace, iterations,
                         converged, seconds, max_feas)


def mf_cca_fit(data, config, optima=None):
    """Multi-objective steepest common descent (MF-CCA)."""
    if config.method != "mf_cca":
        raise ConfigError(f"mf_cca_fit needs method='mf_cca', got {config.method!r}")
    return _fit(data, config, optima)


def sf_cca_fit(data, config, optima=None):
    """Riemannian gradient descent on f_1 + lam * sum_{k<s} Delta^{k,s} (SF-CCA)."""
    if config.method != "sf_cca":
        raise ConfigError(f"sf_cca_fit needs method='sf_cca', got {config.method!r}")
    return _fit(data, config, optima)


def cca_fit(data, config, optima=None):
    """Closed-form CCA wrapped in a FairCcaResult for uniform reporting."""
    t_start = time.perf_counter()
    if optima is None:
        optima = solve_group_cca(data, config.R, config.ridge)
    sol = solve_cca(data.X, data.Y, config.R, config.ridge)
    seconds = time.perf_counter() - t_start
    report = fairness_report(sol.U, sol.V, data, optima)
    feas = max(feasibility_residual(sol.U, sol.gram_x), feasibility_residual(sol.V, sol.gram_y))
    return FairCcaResult(sol.U, sol.V, config, report, optima, IterateTrace(), 0, True,
                         seconds, feas)


def fit(data, config, optima=None):
    """Dispatch on ``config.method``."""
    return {"cca": cca_fit, "mf_cca": mf_cca_fit, "sf_cca": sf_cca_fit}[config.method](
        data, config, optima
    )
