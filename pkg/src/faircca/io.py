"""CSV datasets, metric tables and JSON run records."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cca import standardize
from .errors import ConfigError, GroupMismatch, ParseError
from .fairness import FairnessReport

SCHEMA_VERSION = 1


def fmt_float(x):
    """Full double precision (17 significant digits); None becomes an empty cell."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def parse_cell(text):
    """Inverse of fmt_float for table cells: '' -> None, numbers -> int/float."""
    if text == "":
        return None
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def write_table(path, header, rows):
    """RFC-4180 CSV with full-precision numbers."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt_float(v) for v in row])


def read_table(path):
    """(header, rows) with cells parsed back to numbers where possible."""
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [[parse_cell(c) for c in row] for row in r]


def _read_numeric(path, skip=None, columns=None):
    """Parse a CSV file; returns (header, numeric matrix, skipped column values)."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=1) from None
        if skip is not None and skip not in header:
            raise ParseError(f"{path}: missing column {skip!r}", row=1, column=skip)
        feats = [h for h in header if h != skip] if columns is None else list(columns)
        missing = [c for c in feats if c not in header]
        if missing:
            raise ParseError(f"{path}: missing columns {missing}", row=1, column=missing[0])
        idx = [header.index(c) for c in feats]
        sidx = header.index(skip) if skip is not None else None
        values, extra = [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {line} has {len(row)} fields, expected {len(header)}", row=line
                )
            vals = []
            for i, name in zip(idx, feats):
                try:
                    v = float(row[i])
                except ValueError:
                    raise ParseError(
                        f"{path}: row {line}, column {name!r}: cannot parse {row[i]!r}",
                        row=line, column=name,
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(
                        f"{path}: row {line}, column {name!r}: non-finite value {row[i]!r}",
                        row=line, column=name,
                    )
                vals.append(v)
            values.append(vals)
            if sidx is not None:
                extra.append(row[sidx])
    return feats, np.array(values, dtype=float).reshape(len(values), len(feats)), extra


def load_csv(x_path, y_path, group_column="group", x_columns=None, y_columns=None):
    """Load a two-view dataset: the X file carries the group column.

    Groups are numbered in first-appearance order and both views are
    standardized.
    """
    _, X, groups = _read_numeric(x_path, skip=group_column, columns=x_columns)
    _, Y, _ = _read_numeric(y_path, columns=y_columns)
    if X.shape[0] != Y.shape[0]:
        raise GroupMismatch(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    return standardize(X, Y, groups)


def write_dataset(data, x_path, y_path, group_column="group"):
    """Write a GroupedDataset in the two-file layout read by load_csv."""
    dx, dy = data.dims
    labels = [data.labels[g] for g in data.groups]
    write_table(x_path, [group_column] + [f"x{i + 1}" for i in range(dx)],
                ([lab, *row] for lab, row in zip(labels, data.X)))
    write_table(y_path, [f"y{i + 1}" for i in range(dy)], data.Y)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dump_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, default=_json_default, allow_nan=False)
        fh.write("\n")


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot open {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


@dataclass
class RunRecord:
    method: str
    seed: int
    hyperparameters: dict
    seconds: float
    iterations: int
    converged: bool
    report: FairnessReport | None
    max_feasibility: float
    error: str | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_result(cls, result, extra=None):
        cfg = result.config
        return cls(cfg.method, cfg.seed, cfg.to_dict(), result.seconds, result.iterations,
                   result.converged, result.report, result.max_feasibility, None,
                   dict(extra or {}))

    def to_dict(self):
        return {
            "method": self.method,
            "seed": self.seed,
            "hyperparameters": self.hyperparameters,
            "seconds": self.seconds,
            "iterations": self.iterations,
            "converged": self.converged,
            "report": None if self.report is None else self.report.to_dict(),
            "max_feasibility": self.max_feasibility,
            "error": self.error,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d):
        rep = d.get("report")
        return cls(d["method"], d["seed"], d["hyperparameters"], d["seconds"], d["iterations"],
                   d["converged"], None if rep is None else FairnessReport.from_dict(rep),
                   d["max_feasibility"], d.get("error"), d.get("extra", {}))
