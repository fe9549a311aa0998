"""Disparity errors, pairwise penalties and evaluation metrics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .cca import correlation_profile
from .errors import ConfigError, GroupMismatch, SamePair, ShapeMismatch

PCT_FLOOR = 1e-12


class PenaltyKind(enum.Enum):
    """Penalty phi applied to differences of disparity errors."""

    ABSOLUTE = "absolute"
    SQUARE = "square"
    EXPONENTIAL = "exponential"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"abs": "absolute", "sq": "square", "exp": "exponential"}
        key = aliases.get(str(value).lower(), str(value).lower())
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown penalty {value!r}; use abs, square or exp") from None

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        if self is PenaltyKind.ABSOLUTE:
            return np.abs(x)
        if self is PenaltyKind.SQUARE:
            return x * x
        return np.exp(x)

    def dphi(self, x):
        """Derivative; the absolute penalty uses the subgradient 0 at 0."""
        x = np.asarray(x, dtype=float)
        if self is PenaltyKind.ABSOLUTE:
            return np.sign(x)
        if self is PenaltyKind.SQUARE:
            return 2.0 * x
        return np.exp(x)


def _cross_traces(U, V, data):
    """tr(U^T X^k^T Y^k V) for every group, columnwise (K x R)."""
    out = np.empty((data.K, U.shape[1]))
    for k in range(data.K):
        xk, yk = data.group(k)
        out[k] = np.einsum("ir,ir->r", xk @ U, yk @ V)
    return out


def column_errors(U, V, data, optima):
    """E^k(u_r, v_r) = rho^(k)_r - u_r^T X^k^T Y^k v_r as a K x R array."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if len(optima) != data.K:
        raise GroupMismatch(f"{len(optima)} group optima for {data.K} groups")
    local = np.array([o.rho for o in optima])
    if local.shape[1] != U.shape[1]:
        raise ShapeMismatch(f"group optima have R={local.shape[1]}, U has R={U.shape[1]}")
    return local - _cross_traces(U, V, data)


def disparity_errors(U, V, data, optima):
    """Vector of E^k(U, V) = local_value_k - tr(U^T X^k^T Y^k V)."""
    return column_errors(U, V, data, optima).sum(axis=1)


def disparity_error(k, U, V, data, optima):
    if not 0 <= k < data.K:
        raise GroupMismatch(f"group index {k} outside [0, {data.K})")
    return float(disparity_errors(U, V, data, optima)[k])


def pairwise_delta(k, s, errors, penalty):
    """phi(E^k - E^s) for a pair of distinct groups."""
    if k == s:
        raise SamePair(f"pairwise disparity needs two distinct groups, got ({k}, {s})")
    e = np.asarray(errors, dtype=float)
    if not (0 <= k < e.size and 0 <= s < e.size):
        raise GroupMismatch(f"pair ({k}, {s}) outside [0, {e.size})")
    return float(PenaltyKind.parse(penalty).phi(e[k] - e[s]))


def _gaps(e):
    """Max and ordered-pair sum of |e_i - e_j| along axis 0."""
    d = np.abs(e[:, None, ...] - e[None, :, ...])
    return d.max(axis=(0, 1)), d.sum(axis=(0, 1))


def component_metrics(U, V, data, optima):
    """(rho_r, Delta_max_r, Delta_sum_r) vectors over r = 1..R."""
    rho = correlation_profile(U, V, data.X, data.Y)
    dmax, dsum = _gaps(column_errors(U, V, data, optima))
    return rho, dmax, dsum


def matrix_metrics(U, V, data, optima):
    """Matrix-level (rho, Delta_max, Delta_sum)."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    xu = data.X @ U
    yv = data.Y @ V
    rho = np.sum(xu * yv) / np.sqrt(np.sum(xu * xu) * np.sum(yv * yv))
    dmax, dsum = _gaps(disparity_errors(U, V, data, optima))
    return float(rho), float(dmax), float(dsum)


def _pct(new, old, sign=1.0):
    out = []
    for a, b in zip(np.atleast_1d(new), np.atleast_1d(old)):
        out.append(None if abs(b) < PCT_FLOOR else float(sign * (a - b) / b * 100.0))
    return out


@dataclass
class FairnessReport:
    rho: np.ndarray
    delta_max: np.ndarray
    delta_sum: np.ndarray
    matrix_rho: float
    matrix_delta_max: float
    matrix_delta_sum: float
    group_errors: np.ndarray
    pct: dict | None = field(default=None)

    @property
    def R(self):
        return len(self.rho)

    def to_dict(self):
        return {
            "rho": [float(x) for x in self.rho],
            "delta_max": [float(x) for x in self.delta_max],
            "delta_sum": [float(x) for x in self.delta_sum],
            "matrix_rho": float(self.matrix_rho),
            "matrix_delta_max": float(self.matrix_delta_max),
            "matrix_delta_sum": float(self.matrix_delta_sum),
            "group_errors": [float(x) for x in self.group_errors],
            "pct": self.pct,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["rho"], dtype=float),
            np.array(d["delta_max"], dtype=float),
            np.array(d["delta_sum"], dtype=float),
            float(d["matrix_rho"]),
            float(d["matrix_delta_max"]),
            float(d["matrix_delta_sum"]),
            np.array(d["group_errors"], dtype=float),
            d.get("pct"),
        )


def fairness_report(U, V, data, optima):
    rho, dmax, dsum = component_metrics(U, V, data, optima)
    mrho, mmax, msum = matrix_metrics(U, V, data, optima)
    return FairnessReport(rho, dmax, dsum, mrho, mmax, msum, disparity_errors(U, V, data, optima))


def percentage_change(baseline, method):
    """Percentage changes of a method against a baseline (usually CCA).

    P_rho = (rho - rho_base) / rho_base * 100; P_Delta = -(D - D_base) / D_base * 100,
    so positive P_Delta means reduced disparity. Cells with |base| < 1e-12 are None.
    """
    if baseline.R != method.R:
        raise ShapeMismatch(f"reports have R={baseline.R} and R={method.R}")
    return {
        "rho": _pct(method.rho, baseline.rho),
        "delta_max": _pct(method.delta_max, baseline.delta_max, -1.0),
        "delta_sum": _pct(method.delta_sum, baseline.delta_sum, -1.0),
    }
