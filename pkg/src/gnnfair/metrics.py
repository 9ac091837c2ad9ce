"""Accuracy and group-fairness metrics for binary node classification.

Disparity and inequality are reported in percent, AUC and F1 as fractions.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyGroup, GnnFairError, NoPositives, SingleClass


def predict(logits, threshold: float = 0.0) -> np.ndarray:
    return (np.asarray(logits, dtype=np.float64) >= threshold).astype(np.int64)


def _as_binary(v, name):
    v = np.asarray(v)
    if not np.all((v == 0) | (v == 1)):
        raise GnnFairError(f"{name} must be binary")
    return v.astype(np.int64)


def group_counts(predicted, s):
    """(n_S1Y1, n_S1Y0, n_S0Y1, n_S0Y0), with Y the *predicted* outcome."""
    p = _as_binary(predicted, "predicted")
    s = _as_binary(s, "s")
    return (int(np.sum((s == 1) & (p == 1))), int(np.sum((s == 1) & (p == 0))),
            int(np.sum((s == 0) & (p == 1))), int(np.sum((s == 0) & (p == 0))))


def _rate_gap(a: int, na: int, b: int, nb: int) -> float:
    # 100 * |a/na - b/nb| with one rounding: integer numerator, single division
    return 100 * abs(a * nb - b * na) / (na * nb)


def disparity_from_counts(n_s1y1, n_s1y0, n_s0y1, n_s0y0) -> float:
    n1, n0 = int(n_s1y1) + int(n_s1y0), int(n_s0y1) + int(n_s0y0)
    if n1 == 0 or n0 == 0:
        raise EmptyGroup("both sensitive groups must be non-empty")
    return _rate_gap(int(n_s1y1), n1, int(n_s0y1), n0)


def statistical_disparity(predicted, s) -> float:
    """100 * |P(Yhat=1 | s=1) - P(Yhat=1 | s=0)|."""
    return disparity_from_counts(*group_counts(predicted, s))


def inequal_opportunity(predicted, labels, s) -> float:
    """100 * |TPR(s=1) - TPR(s=0)|."""
    p = _as_binary(predicted, "predicted")
    y = _as_binary(labels, "labels")
    s = _as_binary(s, "s")
    hits = []
    for g in (1, 0):
        pos = (s == g) & (y == 1)
        n_pos = int(pos.sum())
        if n_pos == 0:
            raise NoPositives(f"group s={g} has no positive labels")
        hits.append((int(np.sum(p[pos])), n_pos))
    return _rate_gap(*hits[0], *hits[1])


def auc_roc(logits, labels) -> float:
    """Mann-Whitney estimate of the ROC area; ties count one half."""
    scores = np.asarray(logits, dtype=np.float64)
    y = _as_binary(labels, "labels")
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both label classes")
    ranks = rankdata(scores)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def f1_at_zero(logits, labels, threshold: float = 0.0) -> float:
    y = _as_binary(labels, "labels")
    if y.min() == y.max():
        raise SingleClass("F1 needs both label classes")
    p = predict(logits, threshold)
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    if tp == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


REPORT_COLUMNS = ("auc", "f1", "dsp", "deo", "n_s1y1", "n_s1y0", "n_s0y1", "n_s0y0",
                  "runtime_seconds")


@dataclass(frozen=True)
class EvalReport:
    auc: float
    f1: float
    dsp: float
    deo: float
    group_counts: tuple
    runtime_seconds: float = 0.0

    def __post_init__(self):
        if not (0 <= self.auc <= 1 and 0 <= self.f1 <= 1):
            raise GnnFairError("auc and f1 must lie in [0, 1]")
        if not (0 <= self.dsp <= 100 and 0 <= self.deo <= 100):
            raise GnnFairError("dsp and deo must lie in [0, 100]")

    def as_dict(self) -> dict:
        out = asdict(self)
        counts = out.pop("group_counts")
        out.update(zip(("n_s1y1", "n_s1y0", "n_s0y1", "n_s0y0"), counts))
        return {k: out[k] for k in REPORT_COLUMNS}

    def to_json(self) -> str:
        return json.dumps(self.as_dict())

    def csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow(
            [repr(v) if isinstance(v, float) else v for v in self.as_dict().values()])
        return buf.getvalue()


def evaluate(logits, labels, s, runtime_seconds: float = 0.0, threshold: float = 0.0) -> EvalReport:
    pred = predict(logits, threshold)
    return EvalReport(
        auc=auc_roc(logits, labels),
        f1=f1_at_zero(logits, labels, threshold),
        dsp=statistical_disparity(pred, s),
        deo=inequal_opportunity(pred, labels, s),
        group_counts=group_counts(pred, s),
        runtime_seconds=float(runtime_seconds),
    )


def logit_density_export(logits, labels, s, bins: int = 30):
    """Per-(s, y) normalised histograms of logits over one shared bin range.

    Returns ``(edges, {(s, y): density})``. Empty cells get an all-zero row.
    """
    if bins < 2:
        raise GnnFairError("bins must be at least 2")
    z = np.asarray(logits, dtype=np.float64)
    y = _as_binary(labels, "labels")
    s = _as_binary(s, "s")
    lo, hi = float(z.min()), float(z.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    table = {}
    for gs in (0, 1):
        for gy in (0, 1):
            cell = z[(s == gs) & (y == gy)]
            if len(cell) == 0:
                table[(gs, gy)] = np.zeros(bins)
            else:
                table[(gs, gy)] = np.histogram(cell, bins=edges, density=True)[0]
    return edges, table


def write_density_csv(path, edges, table) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "y", "bin_left", "bin_right", "density"])
        for (gs, gy), dens in sorted(table.items()):
            for i, v in enumerate(dens):
                w.writerow([gs, gy, repr(float(edges[i])), repr(float(edges[i + 1])), repr(float(v))])
