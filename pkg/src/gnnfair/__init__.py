"""Fairness interventions for node classification with graph neural networks."""

from .graph import AttributedGraph, homophily, minmax_scale, stratified_split
from .metrics import EvalReport, evaluate
from .pfr import PfrConfig, pfr, pfr_transform
from .netembed import NetembedConfig, deepwalk_embedding, deepwalk_matrix
from .reverser import reverse_embedding
from .gnn import ModelConfig, PredictionSet, train
from .interventions import (PostProcessConfig, gamma_sweep, pfr_a, pfr_ax, pfr_x,
                            postprocess, unaware)
from .data import DatasetSpec, SyntheticSpec, generate_synthetic, load_dataset

__version__ = "0.1.0"
