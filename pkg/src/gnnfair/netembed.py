"""DeepWalk as explicit matrix factorisation.

The random-walk matrix is accumulated densely (n x n), truncated-log
transformed, and factorised with a rank-k SVD. Cost is O(C n^3) for the
matrix powers, acceptable for graphs up to a few tens of thousands of nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import EmptyGraph, GnnFairError

VOLUME_CONVENTIONS = ("mean_degree", "standard")


@dataclass(frozen=True)
class NetembedConfig:
    C: int = 10
    b: float = 1.0
    k: int = 128
    volume_convention: str = "mean_degree"

    def __post_init__(self):
        if self.C < 1 or self.k < 1 or not self.b > 0:
            raise GnnFairError("C and k must be positive integers and b positive")
        if self.volume_convention not in VOLUME_CONVENTIONS:
            raise GnnFairError(f"volume_convention must be one of {VOLUME_CONVENTIONS}")


def graph_volume(A, convention: str = "mean_degree") -> float:
    """2m/n under the ``mean_degree`` convention, 2m (sum of degrees) under ``standard``."""
    A = sp.csr_matrix(A)
    two_m = float(A.nnz)
    if convention == "mean_degree":
        return two_m / A.shape[0]
    if convention == "standard":
        return two_m
    raise GnnFairError(f"unknown volume convention {convention!r}")


def deepwalk_matrix(A, C: int = 10, b: float = 1.0, volume_convention: str = "mean_degree") -> np.ndarray:
    """log(max(vol * (1/C sum_{c<=C} (D^-1 A)^c) D^-1 / b, 1)), elementwise.

    Degree-0 nodes get zero rows/columns in D^-1.
    """
    A = sp.csr_matrix(A, dtype=np.float64)
    n = A.shape[0]
    if A.nnz == 0:
        raise EmptyGraph("DeepWalk matrix needs at least one edge")
    if C < 1 or not b > 0:
        raise GnnFairError("C must be >= 1 and b > 0")
    deg = np.asarray(A.sum(axis=1)).ravel()
    dinv = np.zeros(n)
    dinv[deg > 0] = 1.0 / deg[deg > 0]
    P = sp.diags(dinv) @ A
    # power c of P applied to D^-1, one power at a time
    term = np.diag(dinv)
    total = np.zeros((n, n))
    for _ in range(C):
        term = P @ term
        total += term
    M = (graph_volume(A, volume_convention) / (C * b)) * total
    # (D^-1 A)^c D^-1 is symmetric; remove rounding asymmetry
    M = 0.5 * (M + M.T)
    np.maximum(M, 1.0, out=M)
    return np.log(M)


def _fix_signs(U):
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return signs


def truncated_svd(M, k: int):
    """Top-k singular triplets (descending), via symmetric eigendecomposition
    when M is exactly symmetric."""
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or k < 1 or k > min(M.shape):
        raise GnnFairError(f"k must lie in [1, {min(M.shape)}]")
    if M.shape[0] == M.shape[1] and np.array_equal(M, M.T):
        lam, V = la.eigh(M)
        order = np.argsort(-np.abs(lam), kind="stable")[:k]
        S = np.abs(lam[order])
        Uk = V[:, order]
        Vk = Uk * np.where(lam[order] < 0, -1.0, 1.0)
    else:
        U, S, Vt = la.svd(M, full_matrices=False)
        Uk, S, Vk = U[:, :k], S[:k], Vt[:k].T
    signs = _fix_signs(Uk)
    return Uk * signs, S, Vk * signs


def embed(M, k: int = 128) -> np.ndarray:
    """Rank-k embedding U_k * sqrt(S_k) of a dense matrix."""
    Uk, S, _ = truncated_svd(M, k)
    return Uk * np.sqrt(S)


def deepwalk_embedding(A, config: NetembedConfig = NetembedConfig()) -> np.ndarray:
    M = deepwalk_matrix(A, config.C, config.b, config.volume_convention)
    return embed(M, min(config.k, M.shape[0]))


def write_embedding(path, U) -> None:
    """Tab-delimited text: node id followed by the k coordinates."""
    U = np.asarray(U, dtype=np.float64)
    with open(path, "w") as fh:
        for i, row in enumerate(U):
            fh.write("\t".join([str(i)] + [repr(float(x)) for x in row]) + "\n")


def read_embedding(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                parts = line.split("\t")
                rows.append((int(parts[0]), [float(x) for x in parts[1:]]))
    rows.sort()
    return np.array([r for _, r in rows], dtype=np.float64)
