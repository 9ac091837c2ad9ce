"""Relabel protected negatives after training and watch disparity fall,
bottom out, and rise again as the flip fraction grows.

    python demos/03_postprocess_sweep.py [outdir]
"""
import sys
from pathlib import Path

import numpy as np

from gnnfair import metrics
from gnnfair.data import SyntheticSpec, generate_synthetic
from gnnfair.gnn import ModelConfig, train
from gnnfair.graph import stratified_split
from gnnfair.interventions import gamma_sweep, select_plus_minus
from gnnfair.plots import emit_gamma_plot

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out.mkdir(parents=True, exist_ok=True)

g = generate_synthetic(SyntheticSpec(n=1000, pos_rate_protected=0.25, seed=3))
split = stratified_split(g.labels, seed=0)
_, pred = train(ModelConfig(epochs=300, seed=0), g, g.attributes, split)
s, y = g.sensitive[split.test], g.labels[split.test]
base = metrics.evaluate(pred.logits, y, s)
print(f"trained model: auc {base.auc:.3f}, disparity {base.dsp:.2f}")

grid = np.round(np.arange(0.05, 0.61, 0.05), 2)
sweep = gamma_sweep(pred, s, y, grid, trials=20, seed=0)
for row in sweep.rows():
    print(f"gamma {row['gamma']:.2f}: auc {row['auc_mean']:.3f}  "
          f"disparity {row['dsp_mean']:5.2f}  inequality {row['deo_mean']:5.2f}")
plus, minus = select_plus_minus(sweep, base.dsp)
print(f"lowest disparity at gamma={plus}; halfway point at gamma={minus}")
print("plot:", emit_gamma_plot(sweep, out / "gamma_sweep.svg"))
