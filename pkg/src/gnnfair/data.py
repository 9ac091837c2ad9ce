"""Dataset loading, similarity-threshold graphs and synthetic graph generation."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .errors import GnnFairError, InfeasibleSpec, MissingColumn, ParseError
from .graph import AttributedGraph, adjacency_from_edges, edge_array, homophily, minmax_scale
from .kvconfig import as_list, read_kv, write_kv

log = logging.getLogger(__name__)

SIMILARITIES = ("cosine", "inverse_euclidean")


@dataclass(frozen=True)
class DatasetSpec:
    name: str
    attribute_file: str
    sensitive: str
    label: str
    ranking: str
    edge_file: Optional[str] = None
    similarity_threshold: Optional[float] = None
    similarity: str = "cosine"
    sensitive_positive: tuple = ()
    label_positive: tuple = ()

    def __post_init__(self):
        if (self.edge_file is None) == (self.similarity_threshold is None):
            raise GnnFairError("set exactly one of edge_file and similarity_threshold")
        if self.similarity_threshold is not None and not 0 < self.similarity_threshold <= 1:
            raise GnnFairError("similarity_threshold must lie in (0, 1]")
        if self.similarity not in SIMILARITIES:
            raise GnnFairError(f"similarity must be one of {SIMILARITIES}")

    @classmethod
    def from_file(cls, path) -> "DatasetSpec":
        """Read a key-value spec; relative paths resolve against the spec's folder."""
        path = Path(path)
        kv = read_kv(path)
        return cls.from_dict(kv, base=path.parent)

    @classmethod
    def from_dict(cls, kv: dict, base=".") -> "DatasetSpec":
        base = Path(base)
        try:
            edges = kv.get("edges")
            thr = kv.get("threshold")
            return cls(
                name=kv.get("name", Path(kv["attributes"]).stem),
                attribute_file=str(base / kv["attributes"]),
                sensitive=kv["sensitive"],
                label=kv["label"],
                ranking=kv["ranking"],
                edge_file=str(base / edges) if edges else None,
                similarity_threshold=float(thr) if thr else None,
                similarity=kv.get("similarity", "cosine"),
                sensitive_positive=tuple(as_list(kv.get("sensitive_positive"))),
                label_positive=tuple(as_list(kv.get("label_positive"))),
            )
        except KeyError as exc:
            raise GnnFairError(f"dataset spec is missing key {exc.args[0]!r}") from None


def _read_table(path):
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline()
        fh.seek(0)
        delim = "\t" if "\t" in first else ","
        rows = list(csv.reader(fh, delimiter=delim))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(f"{path}: empty attribute file")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ParseError(f"{path}: row {i} has {len(r)} fields, expected {len(header)}")
    return header, [[c.strip() for c in r] for r in body]


def _numeric(values):
    try:
        return np.array([float(v) for v in values])
    except ValueError:
        return None


def binarize(values, positive=()) -> np.ndarray:
    """Map raw column values to {0, 1}.

    Numeric columns already in {0, 1} are kept. Otherwise values listed in
    ``positive`` map to 1; with no override the most frequent value maps to 0
    and every other value to 1 (frequency ties: smallest value maps to 0).
    """
    values = list(values)
    num = _numeric(values)
    if positive:
        pos = set(positive)
        if num is not None:
            pos_num = _numeric(list(positive))
            if pos_num is not None:
                return np.isin(num, pos_num).astype(np.int64)
        return np.array([v in pos for v in values], dtype=np.int64)
    if num is not None and np.all((num == 0) | (num == 1)):
        return num.astype(np.int64)
    keys = list(num) if num is not None else values
    counts = Counter(keys)
    majority = min(counts, key=lambda v: (-counts[v], v))
    return np.array([k != majority for k in keys], dtype=np.int64)


def read_edge_file(path, n: int) -> np.ndarray:
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.replace(",", " ").split()
            if len(parts) != 2:
                raise ParseError(f"{path}: line {lineno}: expected two node ids")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: node ids must be integers") from None
            if not (0 <= u < n and 0 <= v < n):
                raise ParseError(f"{path}: line {lineno}: node id outside [0, {n})")
            edges.append((u, v))
    return np.array(edges, dtype=np.int64).reshape(-1, 2)


def load_dataset(spec: DatasetSpec) -> AttributedGraph:
    header, body = _read_table(spec.attribute_file)
    for col in (spec.sensitive, spec.label, spec.ranking):
        if col not in header:
            raise MissingColumn(f"{spec.attribute_file}: no column named {col!r}")
    if spec.ranking in (spec.sensitive, spec.label):
        raise GnnFairError("ranking column must differ from the sensitive and label columns")
    columns = {h: [r[j] for r in body] for j, h in enumerate(header)}
    s = binarize(columns[spec.sensitive], spec.sensitive_positive)
    y = binarize(columns[spec.label], spec.label_positive)

    names, blocks = [], []
    sens_idx = rank_idx = None
    for h in header:
        if h == spec.label:
            continue
        if h == spec.sensitive:
            sens_idx = len(names)
            names.append(h)
            blocks.append(s[:, None].astype(np.float64))
            continue
        num = _numeric(columns[h])
        if num is not None:
            if h == spec.ranking:
                rank_idx = len(names)
            names.append(h)
            blocks.append(num[:, None])
            continue
        if h == spec.ranking:
            bad = next(i for i, v in enumerate(columns[h]) if _numeric([v]) is None)
            raise ParseError(f"{spec.attribute_file}: row {bad + 2}, column {h!r}: "
                             f"ranking value {columns[h][bad]!r} is not numeric")
        cats = sorted(set(columns[h]))
        raw = np.array(columns[h])
        for c in cats:
            names.append(f"{h}={c}")
            blocks.append((raw == c).astype(np.float64)[:, None])
    X = np.hstack(blocks) if blocks else np.zeros((len(body), 0))
    n = X.shape[0]

    if spec.edge_file is not None:
        edges = read_edge_file(spec.edge_file, n)
        A = adjacency_from_edges(n, edges)
    else:
        keep = [j for j in range(X.shape[1]) if j != sens_idx]
        A = build_similarity_graph(minmax_scale(X[:, keep]), spec.similarity_threshold,
                                   spec.similarity)
    return AttributedGraph(A, X, s, y, sens_idx, rank_idx, tuple(names))


def _similarity_block(Xa, Xb, kind):
    if kind == "cosine":
        na = np.linalg.norm(Xa, axis=1)
        nb = np.linalg.norm(Xb, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            S = (Xa @ Xb.T) / np.outer(na, nb)
        S[~np.isfinite(S)] = 0.0
        return S
    from scipy.spatial.distance import cdist
    return 1.0 / (1.0 + cdist(Xa, Xb))


def build_similarity_graph(X, threshold: float, similarity: str = "cosine",
                           block: int = 1024) -> sp.csr_matrix:
    """Edge (u, v), u != v, iff similarity(x_u, x_v) > threshold.

    Rows with zero norm have cosine similarity 0 to everything.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n < 2:
        raise GnnFairError("need at least two rows")
    if not 0 < threshold <= 1:
        raise GnnFairError("threshold must lie in (0, 1]")
    if similarity not in SIMILARITIES:
        raise GnnFairError(f"similarity must be one of {SIMILARITIES}")
    rows, cols = [], []
    for start in range(0, n, block):
        stop = min(start + block, n)
        S = _similarity_block(X[start:stop], X, similarity)
        r, c = np.nonzero(S > threshold)
        r = r + start
        keep = r < c
        rows.append(r[keep])
        cols.append(c[keep])
    edges = np.stack([np.concatenate(rows), np.concatenate(cols)], axis=1) if rows else []
    return adjacency_from_edges(n, edges)


def write_dataset(g: AttributedGraph, directory, name: str = "dataset") -> Path:
    """Write attributes CSV, edge list and a key-value spec; returns the spec path."""
    if g.sensitive_index is None or g.ranking_index is None:
        raise GnnFairError("only graphs holding their sensitive and ranking columns can be written")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    label_name = "label"
    while label_name in g.attribute_names:
        label_name += "_"
    with open(directory / f"{name}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(g.attribute_names) + [label_name])
        for row, lab in zip(g.attributes, g.labels):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])
    with open(directory / f"{name}.edges", "w") as fh:
        for u, v in g.edges():
            fh.write(f"{u}\t{v}\n")
    spec_path = directory / f"{name}.cfg"
    write_kv(spec_path, {
        "name": name,
        "attributes": f"{name}.csv",
        "edges": f"{name}.edges",
        "sensitive": g.attribute_names[g.sensitive_index],
        "label": label_name,
        "ranking": g.attribute_names[g.ranking_index],
    })
    return spec_path


@dataclass(frozen=True)
class SyntheticSpec:
    """Two-group attributed graph with target sensitive/label homophily.

    Labels are drawn per group with exact positive counts. Attributes are
    ``[sensitive, score, f2, ...]``. ``score`` is the ranking variable: the
    label plus ``score_noise`` Gaussian noise, shifted down by ``score_bias``
    for the protected group. The other features are group means plus
    ``noise`` Gaussian noise, so they carry group membership but no label
    signal of their own.
    """

    n: int = 2000
    h_s: float = 0.9
    h_l: float = 0.6
    protected_fraction: float = 0.3
    pos_rate_protected: float = 0.4
    pos_rate_unprotected: float = 0.5
    d: int = 8
    noise: float = 0.5
    avg_degree: float = 10.0
    score_noise: float = 1.0
    score_bias: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("h_s", "h_l", "protected_fraction", "pos_rate_protected",
                     "pos_rate_unprotected"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise GnnFairError(f"{name} must lie in (0, 1)")
        if self.n < 4 or self.d < 3:
            raise GnnFairError("need n >= 4 and d >= 3")
        if not 0 < self.avg_degree < self.n - 1:
            raise GnnFairError("avg_degree must lie in (0, n - 1)")
        if self.noise < 0 or self.score_noise < 0:
            raise GnnFairError("noise scales must be non-negative")

    @classmethod
    def from_dict(cls, kv: dict) -> "SyntheticSpec":
        types = {f: t for f, t in (("n", int), ("d", int), ("seed", int))}
        args = {}
        for k, v in kv.items():
            key = k.split(".", 1)[1] if k.startswith("synthetic.") else k
            if key not in cls.__dataclass_fields__:
                raise GnnFairError(f"unknown synthetic parameter {k!r}")
            try:
                args[key] = types.get(key, float)(v)
            except ValueError as exc:
                raise GnnFairError(f"bad value for {k!r}: {v!r}") from exc
        return cls(**args)

    @classmethod
    def from_file(cls, path) -> "SyntheticSpec":
        return cls.from_dict(read_kv(path))


def _sample_edges(rng, groups, m, h_s, n):
    g1, g0 = groups
    w_same = np.array([len(g1) * (len(g1) - 1) / 2, len(g0) * (len(g0) - 1) / 2])
    if w_same.sum() == 0:
        raise InfeasibleSpec("no within-group pairs exist")
    n_same = int(round(h_s * m))
    n_cross = m - n_same
    if n_same > w_same.sum() or n_cross > len(g1) * len(g0):
        raise InfeasibleSpec("requested homophily is unreachable for these group sizes")
    seen = set()
    edges = []

    def draw(count, pick):
        got = 0
        while got < count:
            batch = pick(max(16, 2 * (count - got)))
            for u, v in batch:
                if u == v:
                    continue
                key = (u, v) if u < v else (v, u)
                if key in seen:
                    continue
                seen.add(key)
                edges.append(key)
                got += 1
                if got == count:
                    break

    p_group = w_same / w_same.sum()

    def pick_same(size):
        which = rng.random(size) < p_group[0]
        out = []
        for w in which:
            grp = g1 if w else g0
            a, b = rng.integers(0, len(grp), size=2)
            out.append((int(grp[a]), int(grp[b])))
        return out

    def pick_cross(size):
        a = rng.integers(0, len(g1), size=size)
        b = rng.integers(0, len(g0), size=size)
        return [(int(g1[i]), int(g0[j])) for i, j in zip(a, b)]

    draw(n_same, pick_same)
    draw(n_cross, pick_cross)
    return edges


def _rewire_labels(rng, edges, s, y, h_l, tol, max_passes=50):
    """Move edge endpoints to nodes of the same group (keeping each edge's
    same-group status) until label homophily is within ``tol`` of ``h_l``."""
    m = len(edges)
    edge_set = set(edges)
    cells = {(a, b): np.flatnonzero((s == a) & (y == b)) for a in (0, 1) for b in (0, 1)}
    for _ in range(max_passes):
        same = np.array([y[u] == y[v] for u, v in edges])
        current = same.mean()
        if abs(current - h_l) <= tol:
            return edges
        want_same = current < h_l
        need = int(round(abs(h_l - current) * m))
        pool = np.flatnonzero(~same if want_same else same)
        rng.shuffle(pool)
        for i in pool[:need]:
            u, v = edges[i]
            if rng.random() < 0.5:
                u, v = v, u
            # replace v by a node in v's group whose label matches (or not) u's
            lab = y[u] if want_same else 1 - y[u]
            cand = cells[(s[v], lab)]
            if len(cand) == 0:
                continue
            w = int(cand[rng.integers(0, len(cand))])
            key = (u, w) if u < w else (w, u)
            if w == u or key in edge_set:
                continue
            edge_set.discard(edges[i])
            edge_set.add(key)
            edges[i] = key
    same = np.mean([y[u] == y[v] for u, v in edges])
    if abs(same - h_l) > tol:
        raise InfeasibleSpec(f"label homophily {h_l} unreachable (reached {same:.3f})")
    return edges


def generate_synthetic(spec: SyntheticSpec) -> AttributedGraph:
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    n1 = int(round(spec.protected_fraction * n))
    if n1 < 2 or n - n1 < 2:
        raise InfeasibleSpec("each group needs at least two nodes")
    s = np.zeros(n, dtype=np.int64)
    s[rng.permutation(n)[:n1]] = 1
    y = np.zeros(n, dtype=np.int64)
    for grp, rate in ((1, spec.pos_rate_protected), (0, spec.pos_rate_unprotected)):
        members = np.flatnonzero(s == grp)
        k = int(round(rate * len(members)))
        y[members[rng.permutation(len(members))[:k]]] = 1

    m = int(round(spec.avg_degree * n / 2))
    groups = (np.flatnonzero(s == 1), np.flatnonzero(s == 0))
    edges = _sample_edges(rng, groups, m, spec.h_s, n)
    edges = _rewire_labels(rng, edges, s, y, spec.h_l, tol=0.01)

    d = spec.d
    X = np.empty((n, d))
    X[:, 0] = s
    X[:, 1] = y - spec.score_bias * s + spec.score_noise * rng.standard_normal(n)
    group_effect = rng.uniform(0.5, 1.5, size=d - 2)
    X[:, 2:] = s[:, None] * group_effect + spec.noise * rng.standard_normal((n, d - 2))
    names = ("sensitive", "score") + tuple(f"f{j}" for j in range(2, d))
    g = AttributedGraph(adjacency_from_edges(n, np.array(edges)), X, s, y, 0, 1, names)
    log.debug("synthetic graph: n=%d m=%d h_s=%.3f h_l=%.3f", g.n, g.m,
              homophily(g, s), homophily(g, y))
    return g
