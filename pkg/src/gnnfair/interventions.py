"""Fairness interventions on graphs (before training) and on predictions
(after training)."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import metrics
from .errors import GnnFairError
from .gnn import PredictionSet
from .graph import AttributedGraph, degree_vector, minmax_scale
from .netembed import NetembedConfig, deepwalk_embedding
from .pfr import PfrConfig, knn_affinity, pfr_transform, quantile_graph
from .reverser import reverse_embedding

DEFAULT_GAMMA_GRID = (0.1, 0.2, 0.3, 0.4)


def unaware(g: AttributedGraph) -> AttributedGraph:
    """Drop the sensitive column from the attributes; ``g.sensitive`` stays
    available for evaluation."""
    if g.sensitive_index is None:
        raise GnnFairError("graph has no sensitive column to drop")
    if g.d < 2:
        raise GnnFairError("need at least two attribute columns")
    j = g.sensitive_index
    X = np.delete(g.attributes, j, axis=1)
    names = g.attribute_names[:j] + g.attribute_names[j + 1:]
    r = g.ranking_index
    if r is not None and r > j:
        r -= 1
    return g.replace(attributes=X, attribute_names=names, sensitive_index=None, ranking_index=r)


def _nonsensitive(g: AttributedGraph) -> np.ndarray:
    if g.sensitive_index is None:
        return g.attributes
    return np.delete(g.attributes, g.sensitive_index, axis=1)


def _pfr_on(data, g: AttributedGraph, config: PfrConfig) -> np.ndarray:
    scaled = minmax_scale(data)
    WX = knn_affinity(scaled, config.k, config.t)
    WF = quantile_graph(g.ranking, g.sensitive, config.p)
    out_dims = config.out_dims or min(scaled.shape[1], 32)
    return pfr_transform(scaled, WX, WF, config.alpha, min(out_dims, g.n - 1))


def pfr_attributes(g: AttributedGraph, config: PfrConfig = PfrConfig()) -> np.ndarray:
    """PFR representation of the non-sensitive attributes."""
    return _pfr_on(_nonsensitive(g), g, config)


def _with_attributes(g: AttributedGraph, Xt: np.ndarray) -> AttributedGraph:
    # orthonormal columns have entries of order 1/sqrt(n); rescale them to the
    # same [0, 1] range as the 0/1 sensitive column before it is re-appended
    X = np.hstack([minmax_scale(Xt), g.sensitive[:, None].astype(np.float64)])
    names = tuple(f"pfr{j}" for j in range(Xt.shape[1])) + ("sensitive",)
    return g.replace(attributes=X, attribute_names=names, sensitive_index=X.shape[1] - 1,
                     ranking_index=None)


def pfr_x(g: AttributedGraph, pfr_config: PfrConfig = PfrConfig()) -> AttributedGraph:
    """Replace attributes by their PFR representation, with the sensitive
    indicator re-appended as the last column. Adjacency is untouched."""
    return _with_attributes(g, pfr_attributes(g, pfr_config))


def _tick(timings, key, t0):
    if timings is not None:
        timings[key] = timings.get(key, 0.0) + time.perf_counter() - t0
    return time.perf_counter()


def pfr_adjacency(g: AttributedGraph, netembed_config: NetembedConfig = NetembedConfig(),
                  pfr_config: PfrConfig = PfrConfig(), rounds: int = 10, jobs: int = 1,
                  timings: Optional[dict] = None):
    """DeepWalk embedding -> PFR -> degree-preserving reconstruction.

    If ``timings`` is given, seconds spent are added under "embed" and "debias".
    """
    if g.m < 1:
        raise GnnFairError("PFR-A needs a graph with at least one edge")
    t0 = time.perf_counter()
    U = deepwalk_embedding(g.adjacency, netembed_config)
    t0 = _tick(timings, "embed", t0)
    U_hat = _pfr_on(U, g, pfr_config)
    A = reverse_embedding(U_hat, degree_vector(g), g.m, rounds, jobs)
    _tick(timings, "debias", t0)
    return A


def pfr_a(g: AttributedGraph, netembed_config: NetembedConfig = NetembedConfig(),
          pfr_config: PfrConfig = PfrConfig(), rounds: int = 10, jobs: int = 1,
          timings: Optional[dict] = None) -> AttributedGraph:
    return g.replace(adjacency=pfr_adjacency(g, netembed_config, pfr_config, rounds, jobs,
                                             timings))


def pfr_ax(g: AttributedGraph, netembed_config: NetembedConfig = NetembedConfig(),
           pfr_config: PfrConfig = PfrConfig(), rounds: int = 10, jobs: int = 1,
           attribute_config: Optional[PfrConfig] = None,
           timings: Optional[dict] = None) -> AttributedGraph:
    """Both branches computed from the original graph.

    ``attribute_config`` overrides ``pfr_config`` for the attribute branch.
    """
    t0 = time.perf_counter()
    Xt = pfr_attributes(g, attribute_config or pfr_config)
    _tick(timings, "debias", t0)
    A = pfr_adjacency(g, netembed_config, pfr_config, rounds, jobs, timings)
    return _with_attributes(g, Xt).replace(adjacency=A)


@dataclass(frozen=True)
class PostProcessConfig:
    gamma: float = 0.1
    trials: int = 20
    seed: int = 0
    max_score: Optional[float] = None  # None: observed maximum logit + 1

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise GnnFairError("gamma must lie in [0, 1]")
        if self.trials < 1:
            raise GnnFairError("trials must be >= 1")


def flip_count(gamma: float, pool_size: int) -> int:
    # small slack so that e.g. 0.3 * 10 floors to 3 despite binary rounding
    return min(pool_size, int(math.floor(gamma * pool_size + 1e-9)))


def max_score(preds: PredictionSet, fixed: Optional[float] = None) -> float:
    if fixed is not None:
        return float(fixed)
    top = float(preds.logits.max()) if len(preds.logits) else 0.0
    return top + 1.0 if top > 0 else 1.0


def postprocess(preds: PredictionSet, s_test, config: PostProcessConfig) -> PredictionSet:
    """Flip a random gamma fraction of protected nodes predicted negative to
    positive, setting their logit to MAX-SCORE. Nothing else changes."""
    s = np.asarray(s_test)
    if s.shape != preds.logits.shape:
        raise GnnFairError("s_test must align with the predictions")
    pool = np.flatnonzero((s == 1) & (preds.predicted == 0))
    k = flip_count(config.gamma, len(pool))
    if k == 0:
        return preds
    rng = np.random.default_rng(config.seed)
    chosen = rng.choice(pool, size=k, replace=False)
    logits = preds.logits.copy()
    score = max_score(preds, config.max_score)
    if score < preds.threshold:
        raise GnnFairError("MAX-SCORE must not be below the decision threshold")
    logits[chosen] = score
    return PredictionSet(logits, threshold=preds.threshold, nodes=preds.nodes)


def trial_seed(seed: int, gamma_index: int, trial: int) -> int:
    """Independent seed for one (gamma, trial) cell of a sweep."""
    ss = np.random.SeedSequence([int(seed), int(gamma_index), int(trial)])
    return int(ss.generate_state(1)[0])


SWEEP_METRICS = ("auc", "f1", "dsp", "deo")


@dataclass(frozen=True)
class GammaSweepResult:
    grid: tuple
    mean: dict  # metric -> array over grid
    std: dict
    trials: int

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=np.float64)
        if len(g) > 1 and not np.all(np.diff(g) > 0):
            raise GnnFairError("gamma grid must be strictly increasing")
        if self.trials < 1:
            raise GnnFairError("trials must be >= 1")

    def rows(self):
        for i, gamma in enumerate(self.grid):
            row = {"gamma": float(gamma)}
            for k in SWEEP_METRICS:
                row[f"{k}_mean"] = float(self.mean[k][i])
                row[f"{k}_std"] = float(self.std[k][i])
            yield row

    def to_csv(self, path) -> None:
        cols = ["gamma"] + [f"{k}_{s}" for k in SWEEP_METRICS for s in ("mean", "std")]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.rows():
                w.writerow([repr(row[c]) for c in cols])

    @classmethod
    def from_csv(cls, path, trials: int = 1) -> "GammaSweepResult":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        grid = tuple(float(r["gamma"]) for r in rows)
        mean = {k: np.array([float(r[f"{k}_mean"]) for r in rows]) for k in SWEEP_METRICS}
        std = {k: np.array([float(r[f"{k}_std"]) for r in rows]) for k in SWEEP_METRICS}
        return cls(grid, mean, std, trials)


def gamma_sweep(preds: PredictionSet, s_test, labels_test, grid=DEFAULT_GAMMA_GRID,
                trials: int = 20, seed: int = 0, max_score_value: Optional[float] = None
                ) -> GammaSweepResult:
    """Mean/std of AUC, F1, disparity and inequality after PostProcess, over
    ``trials`` seeded repetitions per gamma."""
    grid = tuple(float(x) for x in grid)
    if not grid:
        raise GnnFairError("gamma grid must be non-empty")
    s = np.asarray(s_test)
    y = np.asarray(labels_test)
    values = {k: np.zeros((len(grid), trials)) for k in SWEEP_METRICS}
    for gi, gamma in enumerate(grid):
        for t in range(trials):
            cfg = PostProcessConfig(gamma, trials, trial_seed(seed, gi, t), max_score_value)
            rep = metrics.evaluate(postprocess(preds, s, cfg).logits, y, s,
                                   threshold=preds.threshold)
            for k in SWEEP_METRICS:
                values[k][gi, t] = getattr(rep, k)
    return GammaSweepResult(grid, {k: v.mean(axis=1) for k, v in values.items()},
                            {k: v.std(axis=1) for k, v in values.items()}, trials)


def select_plus_minus(sweep: GammaSweepResult, original_dsp: float):
    """(gamma_plus, gamma_minus): the gamma with the lowest mean disparity, and
    the gamma whose mean disparity is closest to the midpoint between the
    original disparity and that minimum. Ties go to the smaller gamma."""
    if not sweep.grid:
        raise GnnFairError("empty sweep")
    dsp = np.asarray(sweep.mean["dsp"], dtype=np.float64)
    i_plus = int(np.argmin(dsp))
    target = 0.5 * (original_dsp + dsp[i_plus])
    i_minus = int(np.argmin(np.abs(dsp - target)))
    return sweep.grid[i_plus], sweep.grid[i_minus]
