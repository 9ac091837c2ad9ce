"""Command-line entry point.

    gnnfair run <config>            run a dataset x model x intervention grid
    gnnfair sweep-gamma <config>    gamma sweep of the Original model
    gnnfair gridsearch <config>     cross product of "a | b" config values
    gnnfair plot <records.csv>      tradeoff scatter from records or aggregates
    gnnfair synth <spec>            write a synthetic dataset to files
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import bench
from .data import SyntheticSpec, generate_synthetic, write_dataset
from .errors import GnnFairError
from .plots import emit_tradeoff_plot


def _overrides(args) -> dict:
    out = {}
    if args.seed is not None:
        out["seed"] = str(args.seed)
    if args.runs is not None:
        out["runs"] = str(args.runs)
    if args.out is not None:
        out["out"] = str(Path(args.out).resolve())
    if getattr(args, "omit_rule", None) is not None:
        out["omit_rule"] = args.omit_rule
    return out


def cmd_run(args):
    cfg = bench.ExperimentConfig.from_file(args.config, _overrides(args))
    records, agg = bench.run_experiment(cfg, jobs=args.jobs)
    for row in agg:
        print(f"{row['model']:<10} {row['intervention']:<13} n={row['n']}  "
              f"auc={row['auc_mean']:.4f}  f1={row['f1_mean']:.4f}  "
              f"dsp={row['dsp_mean']:.2f}  deo={row['deo_mean']:.2f}")
    print(f"wrote {cfg.out}")
    return 0


def cmd_sweep(args):
    cfg = bench.ExperimentConfig.from_file(args.config, _overrides(args))
    for model, sweep in bench.sweep_gamma(cfg).items():
        for row in sweep.rows():
            print(f"{model:<10} gamma={row['gamma']:.3f}  auc={row['auc_mean']:.4f}  "
                  f"dsp={row['dsp_mean']:.2f}  deo={row['deo_mean']:.2f}")
    print(f"wrote {cfg.out}")
    return 0


def cmd_grid(args):
    summary = bench.gridsearch(args.config, _overrides(args), jobs=args.jobs)
    print(f"{len(summary)} aggregate rows")
    return 0


def cmd_plot(args):
    rows = bench.read_csv(args.records)
    out = Path(args.out) if args.out else Path(args.records).with_name(f"tradeoff_{args.metric}.svg")
    if out.suffix != ".svg":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"tradeoff_{args.metric}.svg"
    emit_tradeoff_plot(rows, args.metric, out, args.omit_rule or "mark")
    print(f"wrote {out}")
    return 0


def cmd_synth(args):
    spec = SyntheticSpec.from_file(args.spec)
    if args.seed is not None:
        spec = SyntheticSpec(**{**spec.__dict__, "seed": args.seed})
    g = generate_synthetic(spec)
    out = Path(args.out or ".")
    name = args.name or Path(args.spec).stem
    cfg = write_dataset(g, out, name)
    print(f"n={g.n} m={g.m} wrote {cfg}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gnnfair", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, runs=True):
        p.add_argument("--seed", type=int, default=None, help="base seed")
        p.add_argument("--out", default=None, help="output directory")
        if runs:
            p.add_argument("--runs", type=int, default=None)
            p.add_argument("--jobs", type=int, default=1, help="worker processes")
            p.add_argument("--omit-rule", choices=bench.OMIT_RULES, default=None)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep-gamma", help="PostProcess gamma sweep")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gridsearch", help="run every combination of 'a | b' values")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("plot", help="tradeoff plot from records.csv or aggregate.csv")
    p.add_argument("records")
    p.add_argument("--metric", choices=("dsp", "deo"), default="dsp")
    p.add_argument("--out", default=None, help="SVG file or directory")
    p.add_argument("--omit-rule", choices=bench.OMIT_RULES, default=None)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("synth", help="write a synthetic dataset (csv, edges, cfg)")
    p.add_argument("spec")
    p.add_argument("--name", default=None)
    common(p, runs=False)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GnnFairError, OSError) as exc:
        print(f"gnnfair: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
