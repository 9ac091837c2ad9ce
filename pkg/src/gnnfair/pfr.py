"""Pairwise fair representations via graph-Laplacian trace minimisation.

Two graphs drive the transform: a heat-kernel kNN graph over the (scaled)
attributes, and a between-group quantile graph linking protected and
non-protected nodes that hold the same within-group rank bucket. The
output is the bottom non-trivial eigenvectors of the mixed Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, laplacian
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.spatial.distance import cdist

from .graph import minmax_scale
from .errors import ConvergenceFailure, EmptyGroup, GnnFairError, InvalidK, TooManyQuantiles

TRIVIAL_EIGENVALUE = 1e-9
DENSE_LIMIT = 2000
_BLOCK = 256


@dataclass(frozen=True)
class PfrConfig:
    k: int = 10
    t: Union[float, str] = "auto"
    p: int = 4
    alpha: float = 0.5
    out_dims: Optional[int] = None

    def __post_init__(self):
        if self.k < 1 or self.p < 1 or (self.out_dims is not None and self.out_dims < 1):
            raise GnnFairError("k, p and out_dims must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise GnnFairError("alpha must lie in [0, 1]")
        if self.t != "auto" and not float(self.t) > 0:
            raise GnnFairError("t must be positive or 'auto'")


def knn_indices(X, k: int) -> np.ndarray:
    """Indices of the k nearest rows (Euclidean, self excluded) for every row.

    Ties are broken by ascending row index.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k >= n:
        raise InvalidK(f"k={k} must be smaller than the number of nodes {n}")
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        D = cdist(X[start:stop], X, "sqeuclidean")
        D[np.arange(stop - start), np.arange(start, stop)] = np.inf
        out[start:stop] = np.argsort(D, axis=1, kind="stable")[:, :k]
    return out


def knn_affinity(X, k: int = 10, t: Union[float, str] = "auto") -> sp.csr_matrix:
    """Heat-kernel weights exp(-|x_u - x_v|^2 / t) on pairs where either node
    is among the other's k nearest neighbours.

    ``t="auto"`` uses the mean squared distance over the selected pairs.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    nbrs = knn_indices(X, k)
    rows = np.repeat(np.arange(n), k)
    cols = nbrs.ravel()
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    sq = np.sum((X[pairs[:, 0]] - X[pairs[:, 1]]) ** 2, axis=1)
    if t == "auto":
        t = float(sq.mean()) if sq.mean() > 0 else 1.0
    t = float(t)
    if not t > 0:
        raise GnnFairError("t must be positive")
    w = np.exp(-sq / t)
    W = sp.coo_matrix((np.concatenate([w, w]),
                       (np.concatenate([pairs[:, 0], pairs[:, 1]]),
                        np.concatenate([pairs[:, 1], pairs[:, 0]]))), shape=(n, n)).tocsr()
    W.sort_indices()
    return W


def quantile_buckets(Z, members: np.ndarray, p: int):
    """Split ``members`` into p rank buckets by Z; boundaries at ceil(i*size/p)."""
    order = members[np.argsort(np.asarray(Z)[members], kind="stable")]
    size = len(order)
    bounds = [-(-i * size // p) for i in range(p + 1)]
    return [order[bounds[i]:bounds[i + 1]] for i in range(p)]


def quantile_graph(Z, s, p: int = 4) -> sp.csr_matrix:
    """Binary between-group graph joining protected and non-protected nodes in
    the same within-group quantile of the ranking variable Z."""
    Z = np.asarray(Z, dtype=np.float64)
    s = np.asarray(s)
    n = len(Z)
    prot, rest = np.flatnonzero(s == 1), np.flatnonzero(s == 0)
    if len(prot) == 0 or len(rest) == 0:
        raise EmptyGroup("quantile graph needs both sensitive groups")
    if p > min(len(prot), len(rest)):
        raise TooManyQuantiles(f"p={p} exceeds the smaller group size {min(len(prot), len(rest))}")
    rows, cols = [], []
    for a, b in zip(quantile_buckets(Z, prot, p), quantile_buckets(Z, rest, p)):
        aa, bb = np.meshgrid(a, b, indexing="ij")
        rows.append(aa.ravel())
        cols.append(bb.ravel())
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    W = sp.coo_matrix((np.ones(2 * len(r)), (np.concatenate([r, c]), np.concatenate([c, r]))),
                      shape=(n, n)).tocsr()
    W.sort_indices()
    return W


def mixed_laplacian(WX, WF, alpha: float) -> sp.csr_matrix:
    WX = sp.csr_matrix(WX, dtype=np.float64)
    WF = sp.csr_matrix(WF, dtype=np.float64)
    return ((1.0 - alpha) * laplacian(WX) + alpha * laplacian(WF)).tocsr()


def pfr_objective(Xt, WX, WF, alpha: float) -> float:
    """(1-a) sum W^X_uv |x_u - x_v|^2 + a sum W^F_uv |x_u - x_v|^2 over
    unordered pairs; equals trace(Xt' L Xt)."""
    Xt = np.asarray(Xt, dtype=np.float64)
    total = 0.0
    for weight, W in ((1.0 - alpha, WX), (alpha, WF)):
        U = sp.triu(sp.coo_matrix(W), k=1)
        diff = Xt[U.row] - Xt[U.col]
        total += weight * float(np.sum(U.data * np.sum(diff * diff, axis=1)))
    return total


def _fix_signs(V: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return V * signs


def pfr_transform(data, WX, WF, alpha: float = 0.5, out_dims: int = None,
                  solver: str = "auto", return_eigenvalues: bool = False):
    """Orthonormal n x r embedding minimising the mixed Laplacian objective.

    ``data`` only fixes the default output width ``min(q, 32)``. The constant
    vector of each connected component (eigenvalue below 1e-9) is skipped.
    """
    data = np.asarray(data)
    n = data.shape[0]
    if out_dims is None:
        out_dims = min(data.shape[1], 32)
    if not 0.0 <= alpha <= 1.0:
        raise GnnFairError("alpha must lie in [0, 1]")
    if not 1 <= out_dims < n:
        raise GnnFairError(f"out_dims must be in [1, {n})")
    L = mixed_laplacian(WX, WF, alpha)
    if L.shape != (n, n):
        raise GnnFairError("affinity matrices do not match the data")
    support = sp.csr_matrix(abs(L))
    support.eliminate_zeros()
    n_comp = connected_components(support, directed=False)[0]
    want = out_dims + n_comp
    if want > n:
        raise GnnFairError(f"only {n - n_comp} non-trivial eigenvectors are available")
    if solver == "auto":
        solver = "dense" if n <= DENSE_LIMIT else "sparse"
    if solver not in ("dense", "sparse"):
        raise GnnFairError(f"unknown solver {solver!r}")
    dense = L.toarray() if solver == "dense" else None
    while True:
        if solver == "dense":
            vals, vecs = la.eigh(dense, subset_by_index=[0, want - 1])
        else:
            vals, vecs = _sparse_bottom(L, want)
        keep = vals >= TRIVIAL_EIGENVALUE
        short = out_dims - int(keep.sum())
        if short <= 0:
            break
        # near-zero weights can push extra eigenvalues under the cutoff
        if want >= n or (solver == "sparse" and want >= n - 1):
            raise ConvergenceFailure("too few eigenvalues above the trivial cutoff")
        want = min(n - (solver == "sparse"), want + short)
    vals, vecs = vals[keep][:out_dims], vecs[:, keep][:, :out_dims]
    vecs = _fix_signs(vecs)
    return (vecs, vals) if return_eigenvalues else vecs


def _sparse_bottom(L, k):
    # shift-invert just below zero; L is PSD and singular
    sigma = -1e-3 * max(1.0, float(abs(L).sum(axis=1).max()))
    # fixed start vector keeps the solver deterministic
    v0 = np.random.default_rng(0).standard_normal(L.shape[0])
    try:
        vals, vecs = eigsh(L.tocsc(), k=k, sigma=sigma, which="LM", v0=v0, tol=1e-12)
    except ArpackNoConvergence as exc:
        res = None
        if exc.eigenvectors is not None and exc.eigenvectors.size:
            R = L @ exc.eigenvectors - exc.eigenvectors * exc.eigenvalues
            res = float(np.linalg.norm(R))
        raise ConvergenceFailure("sparse eigensolver did not converge", res) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    # Rayleigh-Ritz cleanup keeps the basis orthonormal to machine precision
    Q, _ = np.linalg.qr(vecs)
    H = Q.T @ (L @ Q)
    vals, S = la.eigh((H + H.T) / 2)
    vecs = Q @ S
    res = float(np.linalg.norm(L @ vecs - vecs * vals))
    if res > 1e-6 * max(1.0, float(np.abs(vals).max())):
        raise ConvergenceFailure("sparse eigensolver residual too large", res)
    return vals, vecs


def pfr(X, Z, s, config: PfrConfig = PfrConfig()):
    """Full PFR on a feature matrix: scale, build both graphs, solve."""
    Xs = minmax_scale(X)
    WX = knn_affinity(Xs, config.k, config.t)
    WF = quantile_graph(Z, s, config.p)
    out_dims = config.out_dims or min(Xs.shape[1], 32)
    return pfr_transform(Xs, WX, WF, config.alpha, min(out_dims, Xs.shape[0] - 1))
