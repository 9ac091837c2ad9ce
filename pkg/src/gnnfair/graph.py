"""Attributed graph container, degree/homophily statistics, scaling and splits."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateClass, EmptyGraph, GnnFairError


def adjacency_from_edges(n: int, edges) -> sp.csr_matrix:
    """Symmetric binary CSR adjacency from an (m, 2) array of node pairs.

    Self-loops are dropped with a warning and duplicate pairs (in either
    orientation) collapse to one edge.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise GnnFairError(f"edge endpoint outside [0, {n})")
    loops = edges[:, 0] == edges[:, 1]
    if loops.any():
        warnings.warn(f"dropping {int(loops.sum())} self-loop(s)", stacklevel=2)
        edges = edges[~loops]
    lo = np.minimum(edges[:, 0], edges[:, 1])
    hi = np.maximum(edges[:, 0], edges[:, 1])
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0) if len(lo) else np.empty((0, 2), np.int64)
    rows = np.concatenate([pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([pairs[:, 1], pairs[:, 0]])
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    A.sort_indices()
    return A


def edge_array(A: sp.spmatrix) -> np.ndarray:
    """Upper-triangular edge list (u < v), sorted lexicographically."""
    U = sp.triu(A, k=1).tocoo()
    order = np.lexsort((U.col, U.row))
    return np.stack([U.row[order], U.col[order]], axis=1).astype(np.int64)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected unweighted graph with node attributes, a binary sensitive
    attribute and binary labels.

    ``sensitive_index`` is the attribute column holding ``sensitive``; it is
    ``None`` once that column has been removed (see ``interventions.unaware``).
    ``ranking_index`` is ``None`` when the ranking column is not among the
    attributes any more (e.g. after the attributes are replaced by PFR output);
    ``ranking`` always keeps the raw ranking scores.
    """

    adjacency: sp.csr_matrix
    attributes: np.ndarray
    sensitive: np.ndarray
    labels: np.ndarray
    sensitive_index: Optional[int]
    ranking_index: Optional[int]
    attribute_names: tuple
    ranking: np.ndarray = field(default=None)

    def __post_init__(self):
        A = sp.csr_matrix(self.adjacency, dtype=np.float64, copy=True)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        X = np.asarray(self.attributes, dtype=np.float64)
        if X.ndim != 2:
            raise GnnFairError("attributes must be a 2-D matrix")
        n, d = X.shape
        if A.shape != (n, n):
            raise GnnFairError(f"adjacency shape {A.shape} does not match {n} nodes")
        if A.nnz and not np.all(A.data == 1.0):
            raise GnnFairError("adjacency entries must be exactly 1")
        if A.diagonal().any():
            raise GnnFairError("adjacency must have a zero diagonal")
        if (A != A.T).nnz:
            raise GnnFairError("adjacency must be symmetric")
        s = _binary(self.sensitive, n, "sensitive")
        y = _binary(self.labels, n, "labels")
        names = tuple(str(c) for c in self.attribute_names)
        if len(names) != d:
            raise GnnFairError(f"{len(names)} attribute names for {d} columns")
        si, ri = self.sensitive_index, self.ranking_index
        if si is not None:
            if not 0 <= si < d:
                raise GnnFairError("sensitive_index out of range")
            if not np.array_equal(X[:, si], s):
                raise GnnFairError("sensitive column does not match the sensitive vector")
        if ri is not None:
            if not 0 <= ri < d or ri == si:
                raise GnnFairError("ranking_index must be a non-sensitive column")
        z = self.ranking
        if z is None:
            if ri is None:
                raise GnnFairError("ranking scores are required when ranking_index is None")
            z = X[:, ri].copy()
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (n,):
            raise GnnFairError("ranking must have one score per node")
        for arr in (X, s, y, z):
            arr.setflags(write=False)
        A.data.setflags(write=False)
        object.__setattr__(self, "adjacency", A)
        object.__setattr__(self, "attributes", X)
        object.__setattr__(self, "sensitive", s)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "attribute_names", names)
        object.__setattr__(self, "ranking", z)

    @classmethod
    def from_edges(cls, edges, attributes, sensitive, labels, sensitive_index,
                   ranking_index, attribute_names=None, ranking=None):
        X = np.asarray(attributes, dtype=np.float64)
        if attribute_names is None:
            attribute_names = [f"x{j}" for j in range(X.shape[1])]
        return cls(adjacency_from_edges(X.shape[0], edges), X, sensitive, labels,
                   sensitive_index, ranking_index, tuple(attribute_names), ranking)

    @property
    def n(self) -> int:
        return self.attributes.shape[0]

    @property
    def m(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def d(self) -> int:
        return self.attributes.shape[1]

    def edges(self) -> np.ndarray:
        return edge_array(self.adjacency)

    def replace(self, **changes) -> "AttributedGraph":
        fields = dict(adjacency=self.adjacency, attributes=self.attributes,
                      sensitive=self.sensitive, labels=self.labels,
                      sensitive_index=self.sensitive_index,
                      ranking_index=self.ranking_index,
                      attribute_names=self.attribute_names, ranking=self.ranking)
        fields.update(changes)
        return AttributedGraph(**fields)

    def same_as(self, other: "AttributedGraph") -> bool:
        return (self.n == other.n
                and (self.adjacency != other.adjacency).nnz == 0
                and np.array_equal(self.attributes, other.attributes)
                and np.array_equal(self.sensitive, other.sensitive)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.ranking, other.ranking)
                and self.sensitive_index == other.sensitive_index
                and self.ranking_index == other.ranking_index
                and self.attribute_names == other.attribute_names)


def _binary(values, n, name):
    v = np.asarray(values)
    if v.shape != (n,):
        raise GnnFairError(f"{name} must have length {n}")
    if not np.all((v == 0) | (v == 1)):
        raise GnnFairError(f"{name} must contain only 0/1 values")
    return v.astype(np.int64)


def degree_vector(g) -> np.ndarray:
    A = g.adjacency if isinstance(g, AttributedGraph) else sp.csr_matrix(g)
    return np.diff(A.indptr).astype(np.int64)


def homophily(g, values) -> float:
    """Fraction of edges whose two endpoints carry the same value."""
    A = g.adjacency if isinstance(g, AttributedGraph) else sp.csr_matrix(g)
    values = np.asarray(values)
    if values.shape != (A.shape[0],):
        raise GnnFairError("values must have one entry per node")
    E = edge_array(A)
    if len(E) == 0:
        raise EmptyGraph("homophily is undefined for a graph without edges")
    return float(np.count_nonzero(values[E[:, 0]] == values[E[:, 1]]) / len(E))


def minmax_scale(X) -> np.ndarray:
    """Column-wise (x - min) / (max - min); constant columns become 0."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        return minmax_scale(X[:, None])[:, 0]
    if X.shape[0] < 1:
        raise GnnFairError("need at least one row")
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    ok = span > 0
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    # guard the rounding of (max - min) / (max - min)
    return np.clip(out, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class Split:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    fractions: tuple
    seed: int

    def sets(self):
        return self.train, self.validation, self.test


def _largest_remainder(total: int, fractions: Sequence[float]) -> np.ndarray:
    quotas = np.asarray(fractions, dtype=np.float64) * total
    counts = np.floor(quotas + 1e-12).astype(np.int64)
    rest = total - counts.sum()
    # stable sort keeps earlier sets first among equal remainders
    order = np.argsort(-(quotas - counts), kind="stable")
    counts[order[:rest]] += 1
    return counts


def stratified_split(labels, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> Split:
    """Partition nodes into train/validation/test with per-class proportional
    allocation (largest remainder) and a seeded per-class shuffle."""
    y = np.asarray(labels)
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise GnnFairError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise GnnFairError("fractions must sum to 1")
    rng = np.random.default_rng(seed)
    parts = [[], [], []]
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if len(members) < 3:
            raise DegenerateClass(f"class {cls} has {len(members)} member(s); need at least 3")
        members = members[rng.permutation(len(members))]
        counts = _largest_remainder(len(members), fractions)
        bounds = np.concatenate([[0], np.cumsum(counts)])
        for i in range(3):
            parts[i].append(members[bounds[i]:bounds[i + 1]])
    train, val, test = (np.sort(np.concatenate(p)) for p in parts)
    return Split(train, val, test, fractions, seed)
