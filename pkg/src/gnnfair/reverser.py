"""Rebuild a graph from a node embedding while keeping node degrees.

Edges join mutual nearest neighbours in embedding space. Each node u may
look at its ``target[u]`` nearest non-completed nodes; a node is completed
once it reaches its target degree and receives no further edges.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .errors import GnnFairError
from .graph import adjacency_from_edges

_BLOCK = 512


def _select(dist_row: np.ndarray, idx: np.ndarray, k: int) -> np.ndarray:
    """The k smallest entries of ``dist_row`` ordered by (distance, index)."""
    if k <= 0:
        return idx[:0]
    if k < len(dist_row):
        kth = np.partition(dist_row, k - 1)[k - 1]
        keep = np.flatnonzero(dist_row <= kth)
        dist_row, idx = dist_row[keep], idx[keep]
    order = np.lexsort((idx, dist_row))[:k]
    return idx[order]


def nearest_lists(U, nodes: np.ndarray, sizes: np.ndarray, jobs: int = 1) -> dict:
    """For each node in ``nodes``, its ``sizes[node]`` nearest others among ``nodes``."""
    U = np.asarray(U, dtype=np.float64)
    nodes = np.asarray(nodes, dtype=np.int64)
    pool = U[nodes]

    def block(start):
        stop = min(start + _BLOCK, len(nodes))
        D = cdist(pool[start:stop], pool, "sqeuclidean")
        out = {}
        for i in range(stop - start):
            row = D[i].copy()
            row[start + i] = np.inf
            mask = np.isfinite(row)
            u = int(nodes[start + i])
            out[u] = _select(row[mask], nodes[mask], int(sizes[u]))
        return out

    starts = range(0, len(nodes), _BLOCK)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    result = {}
    for part in parts:
        result.update(part)
    return result


def reverse_embedding(U_hat, target_degrees, m_target: int = None, rounds: int = 10,
                      jobs: int = 1) -> sp.csr_matrix:
    """Degree-budgeted mutual-nearest-neighbour reconstruction.

    Runs ``rounds`` sweeps over the nodes in index order, stopping early once
    ``m_target`` edges exist. Neighbour lists are rebuilt at the start of each
    round over the nodes not yet completed. Candidates already at their
    target degree are skipped, so no node exceeds its target.
    """
    U_hat = np.asarray(U_hat, dtype=np.float64)
    target = np.asarray(target_degrees, dtype=np.int64)
    n = U_hat.shape[0]
    if target.shape != (n,) or (target < 0).any():
        raise GnnFairError("target_degrees must be a non-negative vector with one entry per node")
    if m_target is None:
        m_target = int(target.sum()) // 2
    if 2 * m_target != target.sum():
        raise GnnFairError("sum of target degrees must equal 2 * m_target")
    if rounds < 0:
        raise GnnFairError("rounds must be non-negative")

    deg = np.zeros(n, dtype=np.int64)
    completed = target <= 0
    nbrs = [set() for _ in range(n)]
    edges = []
    for _ in range(rounds):
        if len(edges) >= m_target or completed.all():
            break
        active = np.flatnonzero(~completed)
        lists = nearest_lists(U_hat, active, target, jobs)
        member = {u: set(map(int, lst)) for u, lst in lists.items()}
        added_this_round = 0
        for u in active:
            u = int(u)
            if completed[u]:
                continue
            for v in lists[u]:
                v = int(v)
                if completed[u]:
                    break
                if completed[v] or deg[v] >= target[v] or v in nbrs[u]:
                    continue
                if u not in member[v]:
                    continue
                edges.append((u, v))
                nbrs[u].add(v)
                nbrs[v].add(u)
                deg[u] += 1
                deg[v] += 1
                added_this_round += 1
                if len(edges) >= m_target:
                    break
                if deg[u] >= target[u]:
                    completed[u] = True
                if deg[v] >= target[v]:
                    completed[v] = True
            if len(edges) >= m_target:
                break
        if added_this_round == 0:
            # lists only shrink through completions, so nothing can change
            break
    return adjacency_from_edges(n, np.array(edges, dtype=np.int64).reshape(-1, 2))
