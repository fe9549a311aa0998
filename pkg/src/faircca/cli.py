"""Command-line interface: faircca {synth,fit,compare,sweep-lambda,sweep-k,sweep-scale}."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError, NumericalError
from .experiments import (
    ExperimentConfig,
    run_compare,
    run_k_sweep,
    run_lambda_sweep,
    run_scaling,
    with_overrides,
)
from .io import RunRecord, dump_json, load_json, write_dataset
from .optim import METHODS, fit
from .synth import make_synthetic_grouped

PENALTIES = {"abs": "absolute", "square": "square", "exp": "exponential"}


def _parser():
    p = argparse.ArgumentParser(prog="faircca", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config or emitted report (JSON)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--r", type=int, dest="R", help="subspace dimension")
        sp.add_argument("--penalty", choices=sorted(PENALTIES))
        sp.add_argument("--lambda", type=float, dest="lam")
        sp.add_argument("--eta0", type=float)
        sp.add_argument("--jobs", type=int, help="parallel sweep cells (default $FAIRCCA_JOBS or 1)")

    sp = sub.add_parser("synth", help="write a synthetic dataset as x.csv / y.csv")
    common(sp)
    sp = sub.add_parser("fit", help="fit one method and write the result")
    common(sp)
    sp.add_argument("--method", choices=METHODS, default="sf_cca")
    sp.add_argument("--x", help="X view CSV (with group column)")
    sp.add_argument("--y", help="Y view CSV")
    sp.add_argument("--group-column", default="group")
    for name, h in [("compare", "CCA vs MF-CCA vs SF-CCA table"),
                    ("sweep-lambda", "SF-CCA over the lambda grid"),
                    ("sweep-k", "disparity versus number of groups"),
                    ("sweep-scale", "runtime versus dimension and sample size")]:
        sp = sub.add_parser(name, help=h)
        common(sp)
        if name == "compare":
            sp.add_argument("--method", action="append", choices=METHODS,
                            help="restrict to these methods (repeatable)")
    return p


def _config(args):
    cfg = ExperimentConfig.from_dict(load_json(args.config)) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
        if "synth" in cfg.data:
            cfg = replace(cfg, data={"synth": {**cfg.data["synth"], "seed": args.seed}})
    cfg = with_overrides(cfg, R=args.R, eta0=args.eta0, lam=args.lam,
                         penalty=PENALTIES.get(args.penalty) if args.penalty else None)
    if getattr(args, "x", None):
        if not args.y:
            raise ConfigError("--x requires --y")
        cfg = replace(cfg, data={"csv": {"x": args.x, "y": args.y,
                                         "group_column": args.group_column}})
    if args.command == "compare" and args.method:
        cfg = replace(cfg, methods=list(args.method))
    if args.out:
        cfg = replace(cfg, out=args.out)
    return ExperimentConfig.from_dict(cfg.to_dict())


def _print_table(header, rows):
    print(",".join(header))
    for row in rows:
        print(",".join("" if v is None else (f"{v:.6g}" if isinstance(v, float) else str(v))
                       for v in row))


def _run(args):
    cfg = _config(args)
    if args.command == "synth":
        out = Path(cfg.out or ".")
        data = make_synthetic_grouped(cfg.synth_spec())
        write_dataset(data, out / "x.csv", out / "y.csv")
        dump_json({"config": cfg.to_dict()}, out / "synth_config.json")
        print(f"wrote {data.N} rows, K={data.K} groups to {out}")
        return 0
    if args.command == "fit":
        data = cfg.load_data()
        res = fit(data, cfg.optimizer_for(args.method))
        rec = RunRecord.from_result(res)
        print(f"{args.method}: iterations={res.iterations} converged={res.converged} "
              f"seconds={res.seconds:.3f}")
        _print_table(["r", "rho", "delta_max", "delta_sum"],
                     [[r + 1, float(res.report.rho[r]), float(res.report.delta_max[r]),
                       float(res.report.delta_sum[r])] for r in range(res.report.R)])
        if cfg.out:
            dump_json({"config": cfg.to_dict(), "record": rec.to_dict(),
                       "U": res.U, "V": res.V}, Path(cfg.out) / "fit.json")
        return 0
    runner = {"compare": lambda c: run_compare(c),
              "sweep-lambda": lambda c: run_lambda_sweep(c, args.jobs),
              "sweep-k": lambda c: run_k_sweep(c, args.jobs),
              "sweep-scale": lambda c: run_scaling(c, args.jobs)}[args.command]
    records, (header, rows), _ = runner(cfg)
    _print_table(header, rows)
    failed = [r for r in records if r.error]
    for r in failed:
        print(f"error in {r.method}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
