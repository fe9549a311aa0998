"""Experiment configuration and the comparison / sweep drivers."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .cca import solve_group_cca
from .errors import ConfigError, FairCcaError
from .fairness import percentage_change
from .io import SCHEMA_VERSION, RunRecord, dump_json, load_csv, write_table
from .optim import METHODS, OptimizerConfig, fit
from .synth import SynthSpec, make_synthetic_grouped

LAMBDA_GRID = (0.01, 0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0)
K_GRID = (2, 3, 4, 5, 6)
DIM_GRID = (50, 100, 150, 200, 250, 300, 350, 400)
SIZE_GRID = (600, 800, 1000, 1200, 1400, 1600, 1800, 2000)
# Synthetic-profile hyperparameters shared by every optimizer.
METHOD_DEFAULTS = {
    "cca": {},
    "mf_cca": {"eta0": 4e-1},
    "sf_cca": {"eta0": 2e-2, "lam": 10.0},
}


def derive_seed(master, index):
    """Seed of sweep cell ``index``; independent of scheduling."""
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))
    return int(ss.generate_state(1)[0])


def default_jobs():
    try:
        return max(1, int(os.environ.get("FAIRCCA_JOBS", "1")))
    except ValueError:
        raise ConfigError("FAIRCCA_JOBS must be an integer") from None


@dataclass
class ExperimentConfig:
    """Data source, per-method optimizer settings and sweep grids.

    ``data`` is either {"synth": {...SynthSpec fields...}} or
    {"csv": {"x": path, "y": path, "group_column": "group",
    "x_columns": null, "y_columns": null}}.
    """

    data: dict = field(default_factory=lambda: {"synth": {}})
    methods: list = field(default_factory=lambda: list(METHODS))
    optimizer: dict = field(default_factory=dict)
    method_params: dict = field(default_factory=lambda: {k: dict(v) for k, v in METHOD_DEFAULTS.items()})
    lambda_grid: list = field(default_factory=lambda: list(LAMBDA_GRID))
    k_grid: list = field(default_factory=lambda: list(K_GRID))
    k_group_size: int = 400
    dim_grid: list = field(default_factory=lambda: list(DIM_GRID))
    size_grid: list = field(default_factory=lambda: list(SIZE_GRID))
    scale_fixed_n: int = 2000
    scale_fixed_d: int = 100
    scale_groups: int = 5
    scale_methods: list = field(default_factory=lambda: ["mf_cca", "sf_cca"])
    repetitions: int = 1
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if not self.methods:
            raise ConfigError("at least one method is required")
        bad = [m for m in list(self.methods) + list(self.scale_methods) if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {METHODS}")
        if any(v < 0 for v in self.lambda_grid):
            raise ConfigError("lambda grid values must be nonnegative")
        if int(self.repetitions) < 1:
            raise ConfigError("repetitions must be at least 1")
        if any(int(k) < 1 for k in self.k_grid):
            raise ConfigError("K grid values must be positive")
        if not isinstance(self.data, dict) or len(self.data) != 1 or \
                next(iter(self.data)) not in ("synth", "csv"):
            raise ConfigError('data must be {"synth": {...}} or {"csv": {...}}')
        for m in self.methods:
            self.optimizer_for(m)

    def optimizer_for(self, method, **overrides):
        params = dict(self.optimizer)
        params.update(self.method_params.get(method, {}))
        params.update(overrides)
        params.setdefault("seed", self.seed)
        params["method"] = method
        if method == "cca":
            params = {k: v for k, v in params.items() if k in ("method", "R", "ridge", "seed")}
        return OptimizerConfig.from_dict(params)

    def synth_spec(self, **overrides):
        if "synth" not in self.data:
            raise ConfigError("this experiment needs a synthetic data source")
        params = dict(self.data["synth"])
        params.setdefault("seed", self.seed)
        params.setdefault("R", self.optimizer.get("R", 2))
        params.update(overrides)
        return SynthSpec.from_dict(params)

    def load_data(self):
        if "synth" in self.data:
            return make_synthetic_grouped(self.synth_spec())
        c = self.data["csv"]
        try:
            return load_csv(c["x"], c["y"], c.get("group_column", "group"),
                            c.get("x_columns"), c.get("y_columns"))
        except KeyError as exc:
            raise ConfigError(f"csv data source needs key {exc}") from None

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "schema_version" in d and "config" in d:
            d = dict(d["config"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(**d)


def _fit_record(data, cfg, optima=None, extra=None):
    try:
        return RunRecord.from_result(fit(data, cfg, optima), extra)
    except FairCcaError as exc:
        return RunRecord(cfg.method, cfg.seed, cfg.to_dict(), None, 0, False, None,
                         None, f"{type(exc).__name__}: {exc}", dict(extra or {}))


def _map(fn, cells, jobs):
    if jobs is None:
        jobs = default_jobs()
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, cells))


def comparison_table(records, R):
    """Rows r = 1..R with (rho, delta_max, delta_sum) per method."""
    header = ["r"]
    for rec in records:
        header += [f"{rec.method}_rho", f"{rec.method}_delta_max", f"{rec.method}_delta_sum"]
    rows = []
    for r in range(R):
        row = [r + 1]
        for rec in records:
            if rec.report is None:
                row += [None, None, None]
            else:
                rep = rec.report
                row += [float(rep.rho[r]), float(rep.delta_max[r]), float(rep.delta_sum[r])]
        rows.append(row)
    return header, rows


def _report(config, kind, records, tables):
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "config": config.to_dict(),
        "records": [r.to_dict() for r in records],
        "tables": {k: {"header": h, "rows": rows} for k, (h, rows) in tables.items()},
    }


def _emit(config, kind, records, tables):
    report = _report(config, kind, records, tables)
    if config.out:
        out = Path(config.out)
        for name, (header, rows) in tables.items():
            write_table(out / f"{name}.csv", header, rows)
        dump_json(report, out / f"{kind}_report.json")
    return report


def run_compare(config):
    """Fit every requested method on the same data; metric table and report."""
    data = config.load_data()
    R = config.optimizer_for(config.methods[0]).R
    ridge = config.optimizer_for(config.methods[0]).ridge
    optima = solve_group_cca(data, R, ridge)
    records = [_fit_record(data, config.optimizer_for(m), optima) for m in config.methods]
    base = next((r for r in records if r.method == "cca" and r.report is not None), None)
    for rec in records:
        if base is not None and rec.report is not None:
            rec.report.pct = percentage_change(base.report, rec.report)
    header, rows = comparison_table(records, R)
    report = _emit(config, "compare", records, {"compare": (header, rows)})
    return records, (header, rows), report


def _lambda_cell(args):
    config, lam = args
    data = config.load_data()
    cfg = config.optimizer_for("sf_cca", lam=float(lam))
    return _fit_record(data, cfg, extra={"lambda": float(lam)})


def run_lambda_sweep(config, jobs=None):
    """SF-CCA over the lambda grid from the same warm start and seed."""
    cells = [(config, lam) for lam in config.lambda_grid]
    records = _map(_lambda_cell, cells, jobs)
    header = ["lambda", "rho_1", "delta_sum_1", "iterations", "seconds"]
    rows = []
    for rec in records:
        ok = rec.report is not None
        rows.append([rec.extra["lambda"],
                     float(rec.report.rho[0]) if ok else None,
                     float(rec.report.delta_sum[0]) if ok else None,
                     rec.iterations, rec.seconds])
    report = _emit(config, "sweep_lambda", records, {"sweep_lambda": (header, rows)})
    return records, (header, rows), report


def _k_cell(args):
    config, index, K = args
    seed = derive_seed(config.seed, index)
    spec = config.synth_spec(sizes=[config.k_group_size] * int(K), rhos=None, seed=seed)
    data = make_synthetic_grouped(spec)
    R = config.optimizer_for(config.methods[0]).R
    optima = solve_group_cca(data, R, config.optimizer.get("ridge"))
    out = []
    for m in config.methods:
        cfg = config.optimizer_for(m, seed=seed)
        out.append(_fit_record(data, cfg, optima, {"K": int(K), "data_seed": seed}))
    return out


def run_k_sweep(config, jobs=None):
    """Regenerate synthetic data per K (fixed group size); disparity per method."""
    cells = [(config, i, K) for i, K in enumerate(config.k_grid)]
    records = [rec for group in _map(_k_cell, cells, jobs) for rec in group]
    header = ["K", "method", "rho_1", "delta_sum_1", "iterations", "seconds"]
    rows = []
    for rec in records:
        ok = rec.report is not None
        rows.append([rec.extra["K"], rec.method,
                     float(rec.report.rho[0]) if ok else None,
                     float(rec.report.delta_sum[0]) if ok else None,
                     rec.iterations, rec.seconds])
    report = _emit(config, "sweep_k", records, {"sweep_k": (header, rows)})
    return records, (header, rows), report


def _scale_cell(args):
    config, index, axis, value, rep = args
    seed = derive_seed(config.seed, index)
    K = config.scale_groups
    if axis == "d":
        n, d = config.scale_fixed_n, int(value)
    else:
        n, d = int(value), config.scale_fixed_d
    sizes = [n // K + (1 if i < n % K else 0) for i in range(K)]
    spec = config.synth_spec(Dx=d, Dy=d, sizes=sizes, rhos=None, seed=seed)
    data = make_synthetic_grouped(spec)
    out = []
    for m in config.scale_methods:
        cfg = config.optimizer_for(m, seed=seed)
        out.append(_fit_record(data, cfg, extra={"axis": axis, "value": int(value), "rep": rep}))
    return out


def run_scaling(config, jobs=None):
    """Runtime versus feature dimension (fixed N) and versus N (fixed d)."""
    cells = []
    points = [("d", v) for v in config.dim_grid] + [("n", v) for v in config.size_grid]
    for axis, value in points:
        for rep in range(int(config.repetitions)):
            cells.append((config, len(cells), axis, value, rep))
    records = [rec for group in _map(_scale_cell, cells, jobs) for rec in group]
    header = ["axis", "value", "method", "mean_seconds", "std_seconds", "repetitions"]
    rows = []
    for axis, value in points:
        for m in config.scale_methods:
            secs = np.array([r.seconds for r in records if r.method == m and r.report is not None
                             and r.extra["axis"] == axis and r.extra["value"] == value])
            mean = float(np.mean(secs)) if secs.size else None
            std = float(np.std(secs, ddof=1)) if secs.size > 1 else 0.0
            rows.append([axis, int(value), m, mean, std, int(secs.size)])
    report = _emit(config, "sweep_scale", records, {"sweep_scale": (header, rows)})
    return records, (header, rows), report


def with_overrides(config, **kw):
    """Copy of ``config`` with optimizer-level overrides applied to every method."""
    opt = dict(config.optimizer)
    mp = {k: dict(v) for k, v in config.method_params.items()}
    for key, value in kw.items():
        if value is None:
            continue
        opt[key] = value
        for params in mp.values():
            params.pop(key, None)
    return replace(config, optimizer=opt, method_params=mp)
