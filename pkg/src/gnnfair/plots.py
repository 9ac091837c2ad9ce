"""Minimal SVG scatter plots: accuracy/fairness tradeoffs and gamma sweeps."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .errors import GnnFairError

W, H = 560, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 55

MODEL_COLORS = {"GCN": "#1f77b4", "GraphSAGE": "#2ca02c", "GIN": "#d62728"}
MARKERS = {"Original": "circle", "Unaware": "square", "PFR-X": "triangle",
           "PFR-A": "diamond", "PFR-AX": "star", "PostProcess+": "plus",
           "PostProcess-": "cross"}
AUC_DROP = 0.95  # cells below 95% of Original's AUC are omitted or marked
LABELS = {"dsp": "Statistical disparity (%)", "deo": "Inequal opportunity (%)"}


def _ticks(lo, hi, n=5):
    return np.linspace(lo, hi, n)


def _range(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.08 * (hi - lo)
    return lo - pad, hi + pad


class _Canvas:
    def __init__(self, xr, yr, xlabel, ylabel, title=""):
        self.xr, self.yr = xr, yr
        self.parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
                      f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
                      f'<rect width="{W}" height="{H}" fill="white"/>']
        x0, x1, y0, y1 = LEFT, W - RIGHT, H - BOTTOM, TOP
        self.parts.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
                          'fill="none" stroke="black"/>')
        for t in _ticks(*xr):
            px = self.px(t)
            self.parts.append(f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 4}" stroke="black"/>')
            self.parts.append(f'<text x="{px:.2f}" y="{y0 + 16}" text-anchor="middle">{t:.3g}</text>')
        for t in _ticks(*yr):
            py = self.py(t)
            self.parts.append(f'<line x1="{x0 - 4}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black"/>')
            self.parts.append(f'<text x="{x0 - 7}" y="{py + 4:.2f}" text-anchor="end">{t:.3g}</text>')
        self.parts.append(f'<text x="{(x0 + x1) / 2}" y="{H - 15}" text-anchor="middle">'
                          f'{escape(xlabel)}</text>')
        self.parts.append(f'<text x="18" y="{(y0 + y1) / 2}" text-anchor="middle" '
                          f'transform="rotate(-90 18 {(y0 + y1) / 2})">{escape(ylabel)}</text>')
        if title:
            self.parts.append(f'<text x="{(x0 + x1) / 2}" y="18" text-anchor="middle">'
                              f'{escape(title)}</text>')
        self.legend_y = TOP + 10

    def px(self, x):
        lo, hi = self.xr
        return LEFT + (x - lo) / (hi - lo) * (W - RIGHT - LEFT)

    def py(self, y):
        lo, hi = self.yr
        return H - BOTTOM - (y - lo) / (hi - lo) * (H - BOTTOM - TOP)

    def marker(self, x, y, shape, color, size=5.0, hollow=False, title=None):
        self.parts.append(_marker(self.px(x), self.py(y), shape, color, size, hollow, title))

    def legend(self, text, shape, color, size=5.0):
        x = W - RIGHT + 18
        self.parts.append(_marker(x, self.legend_y, shape, color, size))
        self.parts.append(f'<text x="{x + 10}" y="{self.legend_y + 4}">{escape(text)}</text>')
        self.legend_y += 17

    def save(self, path):
        Path(path).write_text("\n".join(self.parts + ["</svg>"]) + "\n")


def _marker(x, y, shape, color, size=5.0, hollow=False, title=None):
    fill = "none" if hollow else color
    style = f'fill="{fill}" stroke="{color}" stroke-width="1.5"'
    r = size
    if shape == "circle":
        el = f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.2f}" {style}'
    elif shape == "square":
        el = f'<rect x="{x - r:.2f}" y="{y - r:.2f}" width="{2 * r:.2f}" height="{2 * r:.2f}" {style}'
    else:
        if shape == "triangle":
            pts = [(0, -r), (r, r), (-r, r)]
        elif shape == "diamond":
            pts = [(0, -r), (r, 0), (0, r), (-r, 0)]
        elif shape == "star":
            ang = np.pi / 2 + np.arange(10) * np.pi / 5
            rad = np.where(np.arange(10) % 2 == 0, r * 1.3, r * 0.55)
            pts = list(zip(rad * np.cos(ang), -rad * np.sin(ang)))
        elif shape == "plus":
            pts = [(-r / 3, -r), (r / 3, -r), (r / 3, -r / 3), (r, -r / 3), (r, r / 3),
                   (r / 3, r / 3), (r / 3, r), (-r / 3, r), (-r / 3, r / 3), (-r, r / 3),
                   (-r, -r / 3), (-r / 3, -r / 3)]
        else:  # cross: the plus rotated by 45 degrees
            c = np.cos(np.pi / 4)
            base = [(-r / 3, -r), (r / 3, -r), (r / 3, -r / 3), (r, -r / 3), (r, r / 3),
                    (r / 3, r / 3), (r / 3, r), (-r / 3, r), (-r / 3, r / 3), (-r, r / 3),
                    (-r, -r / 3), (-r / 3, -r / 3)]
            pts = [(c * (a - b), c * (a + b)) for a, b in base]
        coords = " ".join(f"{x + a:.2f},{y + b:.2f}" for a, b in pts)
        el = f'<polygon points="{coords}" {style}'
    if title:
        return el + f'><title>{escape(title)}</title></{el.split()[0][1:]}>'
    return el + "/>"


def _cells(records, metric):
    """(model, intervention) -> (mean auc, mean metric) from records or
    aggregate rows."""
    acc = {}
    for r in records:
        get = r.get if isinstance(r, dict) else (lambda k, r=r: getattr(r, k, None))
        model, name = get("model"), get("intervention")
        if get("auc_mean") is not None:
            auc, val = float(get("auc_mean")), float(get(f"{metric}_mean"))
        elif isinstance(r, dict):
            auc, val = float(r["auc"]), float(r[metric])
        else:
            if r.report is None:
                continue
            auc, val = r.report.auc, getattr(r.report, metric)
        if np.isfinite(auc) and np.isfinite(val):
            acc.setdefault((model, name), []).append((auc, val))
    return {k: tuple(np.mean(v, axis=0)) for k, v in acc.items()}


def flag_auc_drop(cells: dict) -> set:
    """Cells whose AUC is more than 5% (multiplicatively) below the Original
    of the same model."""
    out = set()
    for (model, name), (auc, _) in cells.items():
        base = cells.get((model, "Original"))
        if base is not None and name != "Original" and auc < AUC_DROP * base[0]:
            out.add((model, name))
    return out


def emit_tradeoff_plot(records, metric: str, path, omit_rule: str = "mark") -> Path:
    """AUC (x) against a fairness metric (y): colour per model, marker per
    intervention. Low-AUC cells are dropped (``omit``) or drawn hollow (``mark``)."""
    if metric not in LABELS:
        raise GnnFairError("metric must be 'dsp' or 'deo'")
    if omit_rule not in ("omit", "mark"):
        raise GnnFairError("omit_rule must be 'omit' or 'mark'")
    cells = _cells(records, metric)
    if not cells:
        raise GnnFairError("no records to plot")
    flagged = flag_auc_drop(cells)
    shown = {k: v for k, v in cells.items() if not (omit_rule == "omit" and k in flagged)}
    pts = np.array(list(shown.values()) or list(cells.values()))
    c = _Canvas(_range(pts[:, 0]), _range(pts[:, 1]), "AUC-ROC", LABELS[metric])
    for (model, name), (auc, val) in sorted(shown.items()):
        c.marker(auc, val, MARKERS.get(name, "circle"), MODEL_COLORS.get(model, "#555555"),
                 hollow=(model, name) in flagged, title=f"{model} {name}")
    for model in sorted({m for m, _ in shown}):
        c.legend(model, "circle", MODEL_COLORS.get(model, "#555555"))
    for name in [n for n in MARKERS if any(n == i for _, i in shown)]:
        c.legend(name, MARKERS[name], "#444444")
    if flagged and omit_rule == "mark":
        c.legend("hollow: AUC drop > 5%", "circle", "#444444")
    path = Path(path)
    c.save(path)
    return path


def emit_gamma_plot(sweep, path) -> Path:
    """AUC against disparity (red) and inequality (purple) over the gamma grid;
    markers grow and darken with gamma."""
    grid = np.asarray(sweep.grid, dtype=np.float64)
    if grid.size == 0:
        raise GnnFairError("gamma grid is empty")
    auc = np.asarray(sweep.mean["auc"])
    dsp = np.asarray(sweep.mean["dsp"])
    deo = np.asarray(sweep.mean["deo"])
    c = _Canvas(_range(np.concatenate([dsp, deo])), _range(auc), "Disparity / inequality (%)",
                "AUC-ROC")
    sizes = gamma_marker_sizes(grid)
    for vals, base in ((dsp, (214, 39, 40)), (deo, (148, 103, 189))):
        for i, gamma in enumerate(grid):
            shade = 1.0 - 0.5 * (i / max(len(grid) - 1, 1))
            color = "#%02x%02x%02x" % tuple(int(v * shade) for v in base)
            c.marker(vals[i], auc[i], "circle", color, sizes[i], title=f"gamma={gamma:g}")
    c.legend("disparity", "circle", "#d62728")
    c.legend("inequality", "circle", "#9467bd")
    path = Path(path)
    c.save(path)
    return path


def gamma_marker_sizes(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if len(grid) == 1:
        return np.array([5.0])
    span = grid.max() - grid.min()
    return 3.0 + 6.0 * (grid - grid.min()) / span
