"""Full-batch GCN, GraphSAGE and GIN in numpy with hand-written backprop.

All models emit one logit per node; the loss is mean sigmoid cross-entropy on
the training nodes plus an L2 penalty on weight matrices (biases and GIN's
epsilon are not decayed). Parameters are float64.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, GnnFairError, NonFiniteLoss
from .graph import AttributedGraph

ARCHITECTURES = ("GCN", "GraphSAGE", "GIN")
EPOCH_PRESETS = (500, 1000, 1500, 2000)


@dataclass(frozen=True)
class ModelConfig:
    architecture: str = "GCN"
    layers: int = 2
    hidden: int = 16
    dropout: float = 0.5
    weight_decay: float = 5e-4
    lr: float = 1e-2
    epochs: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise GnnFairError(f"architecture must be one of {ARCHITECTURES}")
        if self.layers < 1 or self.hidden < 1 or self.epochs < 0:
            raise GnnFairError("layers and hidden must be positive, epochs non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise GnnFairError("dropout must lie in [0, 1)")
        if self.lr < 0 or self.weight_decay < 0:
            raise GnnFairError("lr and weight_decay must be non-negative")

    def replace(self, **kw) -> "ModelConfig":
        return ModelConfig(**{**asdict(self), **kw})


@dataclass(frozen=True)
class PredictionSet:
    logits: np.ndarray
    predicted: np.ndarray = None
    threshold: float = 0.0
    nodes: np.ndarray = None

    def __post_init__(self):
        z = np.asarray(self.logits, dtype=np.float64)
        pred = (z >= self.threshold).astype(np.int64)
        if self.predicted is not None and not np.array_equal(np.asarray(self.predicted), pred):
            raise GnnFairError("predicted must equal (logits >= threshold)")
        nodes = np.arange(len(z)) if self.nodes is None else np.asarray(self.nodes, dtype=np.int64)
        if nodes.shape != z.shape:
            raise GnnFairError("nodes must align with logits")
        object.__setattr__(self, "logits", z)
        object.__setattr__(self, "predicted", pred)
        object.__setattr__(self, "nodes", nodes)


def normalize_adjacency(A) -> sp.csr_matrix:
    """D~^-1/2 (A + I) D~^-1/2 with D~ the degrees of A + I."""
    A = sp.csr_matrix(A, dtype=np.float64)
    At = A + sp.identity(A.shape[0], format="csr")
    dinv = 1.0 / np.sqrt(np.asarray(At.sum(axis=1)).ravel())
    D = sp.diags(dinv)
    out = (D @ At @ D).tocsr()
    out.sort_indices()
    return out


class GraphOperators:
    """Sparse propagation matrices needed by the three architectures."""

    def __init__(self, A):
        A = sp.csr_matrix(A, dtype=np.float64)
        self.n = A.shape[0]
        self.adjacency = A
        self.gcn = normalize_adjacency(A)
        deg = np.asarray(A.sum(axis=1)).ravel()
        inv = np.zeros_like(deg)
        inv[deg > 0] = 1.0 / deg[deg > 0]
        self.mean = (sp.diags(inv) @ A).tocsr()
        self.mean_T = self.mean.T.tocsr()


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _relu(x):
    return np.maximum(x, 0.0)


class GNN:
    """A stack of message-passing layers ending in a single logit per node."""

    def __init__(self, config: ModelConfig, in_dim: int):
        self.config = config
        self.in_dim = int(in_dim)
        rng = np.random.default_rng(config.seed)
        dims = [self.in_dim] + [config.hidden] * (config.layers - 1) + [1]
        self.params = {}
        for l in range(config.layers):
            a, b = dims[l], dims[l + 1]
            if config.architecture == "GCN":
                self.params[f"W{l}"] = _glorot(rng, a, b)
                self.params[f"b{l}"] = np.zeros(b)
            elif config.architecture == "GraphSAGE":
                self.params[f"Ws{l}"] = _glorot(rng, a, b)
                self.params[f"Wn{l}"] = _glorot(rng, a, b)
                self.params[f"b{l}"] = np.zeros(b)
            else:
                mid = config.hidden
                self.params[f"eps{l}"] = np.zeros(1)
                self.params[f"W1_{l}"] = _glorot(rng, a, mid)
                self.params[f"b1_{l}"] = np.zeros(mid)
                self.params[f"W2_{l}"] = _glorot(rng, mid, b)
                self.params[f"b2_{l}"] = np.zeros(b)

    def decayed(self, name: str) -> bool:
        return name.startswith("W")

    def forward(self, ops: GraphOperators, X, train: bool = False, rng=None):
        """Logits for every node, plus the cache needed by ``backward``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise DimensionMismatch(f"expected {self.in_dim} input columns, got {X.shape}")
        if X.shape[0] != ops.n:
            raise DimensionMismatch("feature rows do not match the graph")
        p = self.params
        arch = self.config.architecture
        H = X
        caches = []
        L = self.config.layers
        for l in range(L):
            last = l == L - 1
            c = {"H": H}
            if arch == "GCN":
                AH = ops.gcn @ H
                Z = AH @ p[f"W{l}"] + p[f"b{l}"]
                c["AH"] = AH
            elif arch == "GraphSAGE":
                MH = ops.mean @ H
                Z = H @ p[f"Ws{l}"] + MH @ p[f"Wn{l}"] + p[f"b{l}"]
                c["MH"] = MH
            else:
                S = (1.0 + p[f"eps{l}"][0]) * H + ops.adjacency @ H
                Z1 = S @ p[f"W1_{l}"] + p[f"b1_{l}"]
                R = _relu(Z1)
                Z = R @ p[f"W2_{l}"] + p[f"b2_{l}"]
                c.update(S=S, Z1=Z1, R=R)
            c["Z"] = Z
            if not last:
                H = _relu(Z)
                if train and self.config.dropout > 0:
                    keep = 1.0 - self.config.dropout
                    mask = (rng.random(H.shape) < keep) / keep
                    H = H * mask
                    c["mask"] = mask
            caches.append(c)
        return caches[-1]["Z"][:, 0], caches

    def backward(self, ops: GraphOperators, caches, dlogits):
        p = self.params
        arch = self.config.architecture
        grads = {}
        dZ = np.asarray(dlogits, dtype=np.float64)[:, None]
        for l in reversed(range(self.config.layers)):
            c = caches[l]
            if l < self.config.layers - 1:
                # dZ currently holds the gradient w.r.t. this layer's output H'
                if "mask" in c:
                    dZ = dZ * c["mask"]
                dZ = dZ * (c["Z"] > 0)
            H = c["H"]
            if arch == "GCN":
                grads[f"W{l}"] = c["AH"].T @ dZ
                grads[f"b{l}"] = dZ.sum(axis=0)
                dH = ops.gcn.T @ (dZ @ p[f"W{l}"].T)
            elif arch == "GraphSAGE":
                grads[f"Ws{l}"] = H.T @ dZ
                grads[f"Wn{l}"] = c["MH"].T @ dZ
                grads[f"b{l}"] = dZ.sum(axis=0)
                dH = dZ @ p[f"Ws{l}"].T + ops.mean_T @ (dZ @ p[f"Wn{l}"].T)
            else:
                grads[f"W2_{l}"] = c["R"].T @ dZ
                grads[f"b2_{l}"] = dZ.sum(axis=0)
                dZ1 = (dZ @ p[f"W2_{l}"].T) * (c["Z1"] > 0)
                grads[f"W1_{l}"] = c["S"].T @ dZ1
                grads[f"b1_{l}"] = dZ1.sum(axis=0)
                dS = dZ1 @ p[f"W1_{l}"].T
                grads[f"eps{l}"] = np.array([np.sum(dS * H)])
                dH = (1.0 + p[f"eps{l}"][0]) * dS + ops.adjacency.T @ dS
            dZ = dH
        return grads

    def loss_and_grads(self, ops, X, labels, train_idx, train=False, rng=None):
        logits, caches = self.forward(ops, X, train, rng)
        z = logits[train_idx]
        y = np.asarray(labels, dtype=np.float64)[train_idx]
        # softplus(z) - y z, computed stably
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        dlogits = np.zeros_like(logits)
        dlogits[train_idx] = (_sigmoid(z) - y) / len(train_idx)
        grads = self.backward(ops, caches, dlogits)
        wd = self.config.weight_decay
        if wd:
            for name, value in self.params.items():
                if self.decayed(name):
                    loss += 0.5 * wd * float(np.sum(value * value))
                    grads[name] = grads[name] + wd * value
        return loss, grads

    def predict(self, ops, X, nodes=None, threshold: float = 0.0) -> PredictionSet:
        logits, _ = self.forward(ops, X, train=False)
        if nodes is None:
            return PredictionSet(logits, threshold=threshold)
        nodes = np.asarray(nodes, dtype=np.int64)
        return PredictionSet(logits[nodes], threshold=threshold, nodes=nodes)

    def copy_params(self):
        return {k: v.copy() for k, v in self.params.items()}


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params, grads):
        self.step_count += 1
        t = self.step_count
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            mhat = self.m[k] / (1 - self.beta1 ** t)
            vhat = self.v[k] / (1 - self.beta2 ** t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def _operators(graph):
    if isinstance(graph, GraphOperators):
        return graph
    if isinstance(graph, AttributedGraph):
        return GraphOperators(graph.adjacency)
    return GraphOperators(graph)


def train(config: ModelConfig, graph, X_input, split, labels=None):
    """Train for exactly ``config.epochs`` epochs and return the final model
    together with its predictions on the test nodes."""
    ops = _operators(graph)
    if labels is None:
        if not isinstance(graph, AttributedGraph):
            raise GnnFairError("labels are required when graph is not an AttributedGraph")
        labels = graph.labels
    labels = np.asarray(labels)
    train_idx = np.asarray(split.train, dtype=np.int64)
    if len(np.unique(labels[train_idx])) < 2:
        raise GnnFairError("training set must contain both classes")
    model = GNN(config, np.asarray(X_input).shape[1])
    opt = Adam(config.lr)
    rng = np.random.default_rng([config.seed, 1])
    for epoch in range(1, config.epochs + 1):
        loss, grads = model.loss_and_grads(ops, X_input, labels, train_idx, train=True, rng=rng)
        if not np.isfinite(loss):
            raise NonFiniteLoss(epoch, loss)
        opt.step(model.params, grads)
    return model, model.predict(ops, X_input, split.test)


def gradient_check(config: ModelConfig, graph, X, labels, train_idx=None, h: float = 1e-5) -> float:
    """Largest per-tensor relative error ||g_a - g_fd|| / (||g_a|| + ||g_fd||)
    between analytic gradients and central differences (dropout disabled)."""
    ops = _operators(graph)
    X = np.asarray(X, dtype=np.float64)
    if ops.n > 20:
        raise GnnFairError("gradient_check is meant for graphs with at most 20 nodes")
    if train_idx is None:
        train_idx = np.arange(ops.n)
    model = GNN(config.replace(dropout=0.0), X.shape[1])
    _, analytic = model.loss_and_grads(ops, X, labels, train_idx)
    worst = 0.0
    for name, value in model.params.items():
        numeric = np.zeros_like(value)
        flat = value.reshape(-1)
        nflat = numeric.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + h
            up, _ = model.loss_and_grads(ops, X, labels, train_idx)
            flat[i] = old - h
            down, _ = model.loss_and_grads(ops, X, labels, train_idx)
            flat[i] = old
            nflat[i] = (up - down) / (2 * h)
        a = analytic[name]
        denom = np.linalg.norm(a) + np.linalg.norm(numeric)
        err = 0.0 if denom == 0 else np.linalg.norm(a - numeric) / denom
        worst = max(worst, float(err))
    return worst


MAGIC = b"GNNFAIRW"
FORMAT_VERSION = 1


def save_model(path, model: GNN) -> None:
    """Binary weights: 8-byte magic, uint32 version, uint32 header length,
    UTF-8 JSON header (config, input width, ordered names and shapes), then
    every tensor as little-endian row-major float64 in header order."""
    header = {
        "config": asdict(model.config),
        "in_dim": model.in_dim,
        "tensors": [[k, list(v.shape)] for k, v in model.params.items()],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for v in model.params.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_model(path) -> GNN:
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise GnnFairError(f"{path}: not a gnnfair weight file")
        version, size = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise GnnFairError(f"{path}: unsupported format version {version}")
        header = json.loads(fh.read(size))
        model = GNN(ModelConfig(**header["config"]), header["in_dim"])
        for name, shape in header["tensors"]:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8")
            model.params[name] = data.reshape(shape).astype(np.float64)
    return model
