"""Seeded experiment grids: dataset x model x intervention x run.

Outputs written to the experiment's output directory:

    records.csv      one row per (model, intervention, run)
    aggregate.csv    mean and std per (model, intervention) cell
    table.csv        dataset x model x metric rows, intervention columns
    timings.json     stage timings per record (kept out of the CSVs so that
                     reruns reproduce them byte for byte)
    manifest.json    config hash, record counts, failures, file list
    density_*.csv    logit densities of the first run, per model and intervention
    tradeoff_dsp.svg, tradeoff_deo.svg
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import metrics
from .data import DatasetSpec, SyntheticSpec, generate_synthetic, load_dataset
from .errors import GnnFairError
from .gnn import ARCHITECTURES, ModelConfig, train
from .graph import AttributedGraph, stratified_split
from .interventions import (DEFAULT_GAMMA_GRID, PostProcessConfig, gamma_sweep, pfr_a,
                            pfr_ax, pfr_x, postprocess, select_plus_minus, trial_seed,
                            unaware)
from .kvconfig import as_list, parse_kv
from .netembed import NetembedConfig
from .pfr import PfrConfig

log = logging.getLogger(__name__)

INTERVENTIONS = ("Original", "Unaware", "PFR-X", "PFR-A", "PFR-AX", "PostProcess+",
                 "PostProcess-")
POSTPROCESS = ("PostProcess+", "PostProcess-")
METRICS = ("auc", "f1", "dsp", "deo")
COUNT_COLUMNS = ("n_s1y1", "n_s1y0", "n_s0y1", "n_s0y0")
RECORD_COLUMNS = ("dataset", "model", "intervention", "run", "seed", "gamma") + METRICS \
    + COUNT_COLUMNS
STAGES = ("debias", "embed", "train", "postprocess")
OMIT_RULES = ("omit", "mark")


def _canonical_intervention(name: str) -> str:
    # accept the typographic minus and a few spellings in config files
    key = name.strip().replace("−", "-")
    table = {i.lower(): i for i in INTERVENTIONS}
    table.update({"postprocess_plus": "PostProcess+", "postprocess_minus": "PostProcess-"})
    if key.lower() not in table:
        raise GnnFairError(f"unknown intervention {name!r}; choose from {INTERVENTIONS}")
    return table[key.lower()]


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Optional[DatasetSpec] = None
    synthetic: Optional[SyntheticSpec] = None
    name: str = "synthetic"
    models: tuple = ("GCN",)
    interventions: tuple = ("Original",)
    runs: int = 5
    seed: int = 0
    out: str = "results"
    model: ModelConfig = ModelConfig()
    split: tuple = (0.6, 0.2, 0.2)
    pfr: PfrConfig = PfrConfig()
    pfr_attributes: Optional[PfrConfig] = None
    netembed: NetembedConfig = NetembedConfig()
    rounds: int = 10
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    gamma_trials: int = 20
    omit_rule: str = "mark"
    source: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if (self.dataset is None) == (self.synthetic is None):
            raise GnnFairError("configure exactly one of a dataset and a synthetic spec")
        if self.runs < 1:
            raise GnnFairError("runs must be >= 1")
        if not self.models or any(m not in ARCHITECTURES for m in self.models):
            raise GnnFairError(f"models must be a non-empty subset of {ARCHITECTURES}")
        if not self.interventions:
            raise GnnFairError("at least one intervention is required")
        for name in self.interventions:
            if name not in INTERVENTIONS:
                raise GnnFairError(f"unknown intervention {name!r}")
        if self.rounds < 0:
            raise GnnFairError("reverser rounds must be >= 0")
        if not self.gamma_grid or self.gamma_trials < 1:
            raise GnnFairError("gamma grid must be non-empty and trials >= 1")
        if self.omit_rule not in OMIT_RULES:
            raise GnnFairError(f"omit_rule must be one of {OMIT_RULES}")

    @classmethod
    def from_dict(cls, kv: dict, base=".") -> "ExperimentConfig":
        kv = dict(kv)
        base = Path(base)
        known = set()

        def take(key, default=None):
            known.add(key)
            return kv.get(key, default)

        dataset = synthetic = None
        if take("dataset"):
            dataset = DatasetSpec.from_file(base / kv["dataset"])
        syn = {k: v for k, v in kv.items() if k.startswith("synthetic.")}
        known.update(syn)
        if take("synthetic"):
            syn = {**parse_kv((base / kv["synthetic"]).read_text()), **syn}
        if syn:
            synthetic = SyntheticSpec.from_dict(syn)
        name = take("name") or (dataset.name if dataset else "synthetic")

        def section(prefix, casts):
            out = {}
            for k, v in kv.items():
                if k.startswith(prefix + "."):
                    known.add(k)
                    key = k[len(prefix) + 1:]
                    if key not in casts:
                        raise GnnFairError(f"unknown key {k!r}")
                    out[key] = casts[key](v)
            return out

        def t_value(v):
            return v if v.strip() == "auto" else float(v)

        pfr_casts = dict(k=int, t=t_value, p=int, alpha=float, out_dims=int)
        pfr = PfrConfig(**section("pfr", pfr_casts))
        attr = section("pfr_attributes", pfr_casts)
        pfr_attr = replace(pfr, **attr) if attr else None
        netembed = NetembedConfig(**section("netembed", dict(C=int, b=float, k=int,
                                                             volume_convention=str)))
        model_keys = dict(epochs=int, hidden=int, layers=int, lr=float, weight_decay=float,
                          dropout=float)
        model = ModelConfig(**{k: cast(take(k)) for k, cast in model_keys.items()
                               if take(k) is not None})
        try:
            cfg = cls(
                dataset=dataset, synthetic=synthetic, name=name,
                models=tuple(as_list(take("models", "GCN"))),
                interventions=tuple(_canonical_intervention(i)
                                    for i in as_list(take("interventions", "Original"))),
                runs=int(take("runs", 5)),
                seed=int(take("seed", 0)),
                out=str(base / take("out", "results")),
                model=model,
                split=tuple(as_list(take("split", "0.6, 0.2, 0.2"), float)),
                pfr=pfr, pfr_attributes=pfr_attr, netembed=netembed,
                rounds=int(take("reverser.rounds", 10)),
                gamma_grid=tuple(as_list(take("gamma.grid", "0.1, 0.2, 0.3, 0.4"), float)),
                gamma_trials=int(take("gamma.trials", 20)),
                omit_rule=take("omit_rule", "mark"),
                source=kv,
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, GnnFairError):
                raise
            raise GnnFairError(f"bad experiment config: {exc}") from exc
        unknown = sorted(set(kv) - known)
        if unknown:
            raise GnnFairError(f"unknown configuration keys: {', '.join(unknown)}")
        return cfg

    @classmethod
    def from_file(cls, path, overrides: Optional[dict] = None) -> "ExperimentConfig":
        path = Path(path)
        kv = parse_kv(path.read_text())
        kv.update(overrides or {})
        return cls.from_dict(kv, base=path.parent)

    def digest(self) -> str:
        text = "\n".join(f"{k} = {self.source[k]}" for k in sorted(self.source))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class RunRecord:
    dataset: str
    model: str
    intervention: str
    run: int
    seed: int
    report: Optional[metrics.EvalReport]
    timings: dict
    gamma: Optional[float] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.report is not None

    def row(self) -> list:
        vals = self.report.as_dict()
        out = [self.dataset, self.model, self.intervention, self.run, self.seed,
               "" if self.gamma is None else repr(float(self.gamma))]
        out += [repr(float(vals[k])) for k in METRICS]
        out += [int(vals[k]) for k in COUNT_COLUMNS]
        return out


def build_graph(config: ExperimentConfig) -> AttributedGraph:
    if config.synthetic is not None:
        return generate_synthetic(config.synthetic)
    return load_dataset(config.dataset)


def apply_intervention(name: str, g: AttributedGraph, config: ExperimentConfig,
                       timings: dict) -> AttributedGraph:
    """Pre-training transform for ``name``; post-training names return ``g``."""
    if name in ("Original",) + POSTPROCESS:
        return g
    if name == "Unaware":
        t0 = time.perf_counter()
        out = unaware(g)
        timings["debias"] = timings.get("debias", 0.0) + time.perf_counter() - t0
        return out
    if name == "PFR-X":
        t0 = time.perf_counter()
        out = pfr_x(g, config.pfr_attributes or config.pfr)
        timings["debias"] = timings.get("debias", 0.0) + time.perf_counter() - t0
        return out
    if name == "PFR-A":
        return pfr_a(g, config.netembed, config.pfr, config.rounds, timings=timings)
    return pfr_ax(g, config.netembed, config.pfr, config.rounds,
                  attribute_config=config.pfr_attributes, timings=timings)


def _postprocessed(pred, g, split, which, seed, config, timings):
    t0 = time.perf_counter()
    s_test = g.sensitive[split.test]
    y_test = g.labels[split.test]
    original = metrics.evaluate(pred.logits, y_test, s_test)
    sweep = gamma_sweep(pred, s_test, y_test, config.gamma_grid, config.gamma_trials, seed)
    g_plus, g_minus = select_plus_minus(sweep, original.dsp)
    gamma = g_plus if which == "PostProcess+" else g_minus
    # report one realised relabelling: the first trial of the chosen gamma
    gi = sweep.grid.index(gamma)
    out = postprocess(pred, s_test, PostProcessConfig(gamma, config.gamma_trials,
                                                      trial_seed(seed, gi, 0)))
    timings["postprocess"] = time.perf_counter() - t0
    return out, gamma


def run_cell(config: ExperimentConfig, g: AttributedGraph, model: str, run: int,
             densities: bool = False):
    """All interventions of one (model, run) pair. PostProcess variants reuse
    the Original model of the same run."""
    seed = config.seed + run
    split = stratified_split(g.labels, config.split, seed)
    mcfg = config.model.replace(architecture=model, seed=seed)
    s_test = g.sensitive[split.test]
    y_test = g.labels[split.test]
    records, dens = [], {}
    base_pred = None
    base_train = 0.0
    for name in config.interventions:
        timings = {k: 0.0 for k in STAGES}
        t_start = time.perf_counter()
        gamma = None
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                if name in POSTPROCESS or name == "Original":
                    if base_pred is None:
                        t0 = time.perf_counter()
                        _, base_pred = train(mcfg, g, g.attributes, split)
                        base_train = time.perf_counter() - t0
                    timings["train"] = base_train
                    pred = base_pred
                    if name in POSTPROCESS:
                        pred, gamma = _postprocessed(pred, g, split, name, seed, config, timings)
                else:
                    gi = apply_intervention(name, g, config, timings)
                    t0 = time.perf_counter()
                    _, pred = train(mcfg, gi, gi.attributes, split)
                    timings["train"] = time.perf_counter() - t0
                report = metrics.evaluate(pred.logits, y_test, s_test)
            if densities:
                dens[name] = metrics.logit_density_export(pred.logits, y_test, s_test)
            err = None
        except (GnnFairError, RuntimeError, np.linalg.LinAlgError) as exc:
            report, err = None, f"{type(exc).__name__}: {exc}"
            log.warning("%s/%s/%s run %d failed: %s", config.name, model, name, run, err)
        timings["total"] = time.perf_counter() - t_start
        if name in POSTPROCESS:
            # the shared Original training is counted once per record
            timings["total"] += timings["train"]
        records.append(RunRecord(config.name, model, name, run, seed, report, timings, gamma, err))
    return records, dens


def _cell_job(args):
    config, g, model, run = args
    return run_cell(config, g, model, run, densities=(run == 0))


def run_experiment(config: ExperimentConfig, jobs: int = 1, write: bool = True):
    """Run the full grid; returns (records, aggregate rows)."""
    g = build_graph(config)
    tasks = [(config, g, model, run) for model in config.models for run in range(config.runs)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_cell_job, tasks))
    else:
        results = [_cell_job(t) for t in tasks]
    order = {name: i for i, name in enumerate(config.interventions)}
    records, densities = [], {}
    for (_, _, model, _), (recs, dens) in zip(tasks, results):
        records.extend(recs)
        for name, d in dens.items():
            densities[(model, name)] = d
    records.sort(key=lambda r: (config.models.index(r.model), order[r.intervention], r.run))
    failures = [r for r in records if not r.ok]
    if failures:
        warnings.warn(f"{len(failures)} run(s) failed and are excluded from the aggregates",
                      stacklevel=2)
    agg = aggregate(records)
    if write:
        write_outputs(config, g, records, agg, densities)
    return records, agg


def aggregate(records) -> list:
    """Mean and population std (ddof=0) per (dataset, model, intervention)."""
    cells = {}
    for r in records:
        cells.setdefault((r.dataset, r.model, r.intervention), []).append(r)
    rows = []
    for (ds, model, name), recs in cells.items():
        ok = [r for r in recs if r.ok]
        row = {"dataset": ds, "model": model, "intervention": name, "n": len(ok),
               "failures": len(recs) - len(ok)}
        for k in METRICS:
            vals = np.array([getattr(r.report, k) for r in ok], dtype=np.float64)
            row[f"{k}_mean"] = float(vals.mean()) if len(vals) else float("nan")
            row[f"{k}_std"] = float(vals.std()) if len(vals) else float("nan")
        rows.append(row)
    return rows


AGGREGATE_COLUMNS = ("dataset", "model", "intervention", "n", "failures") + tuple(
    f"{k}_{s}" for k in METRICS for s in ("mean", "std"))


def aggregate_from_rows(rows) -> list:
    """Aggregate parsed records.csv rows (dicts of strings)."""
    cells = {}
    for r in rows:
        cells.setdefault((r["dataset"], r["model"], r["intervention"]), []).append(r)
    out = []
    for (ds, model, name), recs in cells.items():
        row = {"dataset": ds, "model": model, "intervention": name, "n": len(recs)}
        for k in METRICS:
            vals = np.array([float(r[k]) for r in recs])
            row[f"{k}_mean"] = float(vals.mean())
            row[f"{k}_std"] = float(vals.std())
        out.append(row)
    return out


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow(row)


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else v


def table_rows(config: ExperimentConfig, agg: list) -> list:
    """Dataset x model x metric rows with one "mean (std)" column per intervention."""
    lookup = {(r["model"], r["intervention"]): r for r in agg}
    rows = []
    for model in config.models:
        for k in METRICS:
            row = [config.name, model, k]
            for name in config.interventions:
                r = lookup.get((model, name))
                if r is None or r["n"] == 0:
                    row.append("")
                else:
                    row.append(f"{r[k + '_mean']:.4f} ({r[k + '_std']:.4f})")
            rows.append(row)
    return rows


def write_outputs(config: ExperimentConfig, g, records, agg, densities) -> Path:
    from .plots import emit_tradeoff_plot

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    ok = [r for r in records if r.ok]
    _write_csv(out / "records.csv", RECORD_COLUMNS, [r.row() for r in ok])
    _write_csv(out / "aggregate.csv", AGGREGATE_COLUMNS,
               [[_fmt(row[c]) for c in AGGREGATE_COLUMNS] for row in agg])
    _write_csv(out / "table.csv", ("dataset", "model", "metric") + tuple(config.interventions),
               table_rows(config, agg))
    for (model, name), (edges, table) in sorted(densities.items()):
        fname = f"density_{model}_{name.replace('+', 'plus').replace('-', '_')}.csv"
        metrics.write_density_csv(out / fname, edges, table)
    timings = [{"model": r.model, "intervention": r.intervention, "run": r.run,
                **{k: r.timings.get(k, 0.0) for k in STAGES + ("total",)}} for r in records]
    (out / "timings.json").write_text(json.dumps(timings, indent=1) + "\n")
    files = ["records.csv", "aggregate.csv", "table.csv", "timings.json"]
    if ok:
        for metric in ("dsp", "deo"):
            emit_tradeoff_plot(agg, metric, out / f"tradeoff_{metric}.svg", config.omit_rule)
            files.append(f"tradeoff_{metric}.svg")
    manifest = {
        "config_sha256": config.digest(),
        "config": {k: config.source[k] for k in sorted(config.source)},
        "dataset": config.name,
        "nodes": g.n,
        "edges": g.m,
        "records": len(records),
        "failures": [{"model": r.model, "intervention": r.intervention, "run": r.run,
                      "error": r.error} for r in records if not r.ok],
        "files": sorted(files + [f.name for f in out.glob("density_*.csv")]),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return out


def sweep_gamma(config: ExperimentConfig, write: bool = True) -> dict:
    """gamma sweep of the Original model of run 0, per model."""
    from .plots import emit_gamma_plot

    g = build_graph(config)
    seed = config.seed
    split = stratified_split(g.labels, config.split, seed)
    out = Path(config.out)
    results = {}
    for model in config.models:
        _, pred = train(config.model.replace(architecture=model, seed=seed), g, g.attributes, split)
        sweep = gamma_sweep(pred, g.sensitive[split.test], g.labels[split.test],
                            config.gamma_grid, config.gamma_trials, seed)
        results[model] = sweep
        if write:
            out.mkdir(parents=True, exist_ok=True)
            sweep.to_csv(out / f"gamma_{model}.csv")
            emit_gamma_plot(sweep, out / f"gamma_{model}.svg")
    return results


def grid_points(kv: dict) -> list:
    """Expand ``key = a | b | c`` values into the cross product of configs."""
    keys = sorted(k for k, v in kv.items() if "|" in v)
    choices = [[c.strip() for c in kv[k].split("|")] for k in keys]
    points = []
    for combo in itertools.product(*choices):
        point = dict(kv)
        point.update(zip(keys, combo))
        points.append((dict(zip(keys, combo)), point))
    return points


def gridsearch(path, overrides: Optional[dict] = None, jobs: int = 1) -> list:
    path = Path(path)
    kv = parse_kv(path.read_text())
    kv.update(overrides or {})
    base_out = kv.get("out", "results")
    summary = []
    points = grid_points(kv)
    for i, (chosen, point) in enumerate(points):
        point["out"] = str(Path(base_out) / f"grid_{i:03d}")
        cfg = ExperimentConfig.from_dict(point, base=path.parent)
        _, agg = run_experiment(cfg, jobs=jobs)
        for row in agg:
            summary.append({"point": i, **chosen, **row})
    out = path.parent / base_out
    out.mkdir(parents=True, exist_ok=True)
    keys = sorted({k for pt, _ in points for k in pt})
    columns = ("point",) + tuple(keys) + AGGREGATE_COLUMNS
    _write_csv(out / "gridsearch.csv", columns,
               [[_fmt(row.get(c, "")) for c in columns] for row in summary])
    return summary
