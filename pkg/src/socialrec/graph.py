"""Directed weighted social network with d-hop reachability queries.

Edge (j, i) with weight A_ij means "user j influences user i". Self-influence
weights A_ii are kept out of the edge list so that reachability queries never
have to special-case loops. Rows of the combined influence matrix are
sub-stochastic; the residual 1 - A_ii - sum_j A_ij is the budget claimed by
the recommender influence B_i.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

ROW_SUM_TOL = 1e-9

# Below this size the cached neighbor operator is a dense array; above it a
# CSR matrix. Dense wins on per-step overhead for the small systems used by
# the fixed-point checks.
_DENSE_LIMIT = 1500


class GraphError(ValueError):
    pass


@dataclass
class RowValidation:
    """Per-user report of whether A_ii + sum_j A_ij + B_i == 1."""

    residuals: np.ndarray  # signed deviation from 1 per user
    ok: np.ndarray         # bool per user
    passed: bool
    tol: float


class SocialGraph:
    """Directed weighted graph over n_users dense-indexed users.

    Read-only after construction; adjacency is kept in both directions
    because the opinion update walks in-edges while diagnostics and
    degree statistics walk out-edges.
    """

    def __init__(self, n_users, edges, self_weights):
        """edges: iterable of (source j, target i, weight A_ij) triples."""
        edges = list(edges)
        if edges:
            src = np.asarray([e[0] for e in edges], dtype=np.int64)
            dst = np.asarray([e[1] for e in edges], dtype=np.int64)
            w = np.asarray([e[2] for e in edges], dtype=np.float64)
        else:
            src = np.empty(0, dtype=np.int64)
            dst = np.empty(0, dtype=np.int64)
            w = np.empty(0, dtype=np.float64)
        self._init_from_arrays(n_users, src, dst, w, self_weights)

    @classmethod
    def from_arrays(cls, n_users, src, dst, weights, self_weights):
        graph = cls.__new__(cls)
        graph._init_from_arrays(
            n_users,
            np.asarray(src, dtype=np.int64),
            np.asarray(dst, dtype=np.int64),
            np.asarray(weights, dtype=np.float64),
            self_weights,
        )
        return graph

    def _init_from_arrays(self, n_users, src, dst, w, self_weights):
        n = int(n_users)
        if n <= 0:
            raise GraphError("graph needs at least one user")
        self_weights = np.asarray(self_weights, dtype=np.float64)
        if self_weights.shape != (n,):
            raise GraphError(f"self_weights must have shape ({n},)")
        if np.any(self_weights <= 0.0) or np.any(self_weights > 1.0):
            raise GraphError("self-influence weights must lie in (0, 1]")
        if src.shape != dst.shape or src.shape != w.shape:
            raise GraphError("edge arrays must have matching shapes")
        if src.size:
            if src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n:
                raise GraphError("edge endpoint out of range")
            if np.any(src == dst):
                raise GraphError("self-loops belong in self_weights, not the edge list")
            if np.any(w < 0.0):
                raise GraphError("edge weights must be nonnegative")
            key = dst * n + src
            if np.unique(key).size != key.size:
                raise GraphError("duplicate (source, target) pair in edge list")
            # canonical order: by target, then source
            order = np.argsort(key, kind="stable")
            src, dst, w = src[order], dst[order], w[order]

        self.n_users = n
        self.edge_src = src
        self.edge_dst = dst
        self.edge_weights = w
        self.self_weights = self_weights

        in_sums = np.bincount(dst, weights=w, minlength=n) if src.size else np.zeros(n)
        if np.any(self_weights + in_sums > 1.0 + ROW_SUM_TOL):
            raise GraphError("row influence exceeds 1 (rows must be sub-stochastic)")

        # per-user in-edge slices (edges are sorted by target)
        counts = np.bincount(dst, minlength=n) if src.size else np.zeros(n, dtype=np.int64)
        offsets = np.concatenate(([0], np.cumsum(counts)))
        self._in_sources = [src[offsets[i]:offsets[i + 1]] for i in range(n)]

        out_order = np.argsort(src, kind="stable")
        out_counts = np.bincount(src, minlength=n) if src.size else np.zeros(n, dtype=np.int64)
        out_offsets = np.concatenate(([0], np.cumsum(out_counts)))
        dst_by_src = dst[out_order]
        self._out_targets = [dst_by_src[out_offsets[j]:out_offsets[j + 1]] for j in range(n)]
        self._neighbor_op = None
        self._binary_in = None

    @property
    def n_edges(self):
        return int(self.edge_src.size)

    def in_neighbors(self, i):
        """Sources of edges into user i (no self)."""
        return self._in_sources[i]

    def out_neighbors(self, j):
        """Targets of edges out of user j (no self)."""
        return self._out_targets[j]

    def in_weight_sums(self):
        """sum_j A_ij per user, excluding self-influence."""
        if self.edge_src.size == 0:
            return np.zeros(self.n_users)
        return np.bincount(self.edge_dst, weights=self.edge_weights, minlength=self.n_users)

    def d_hop_influencers(self, i, d):
        """All users with a directed path of length <= d into user i.

        Always contains i itself; breadth-first search over reversed edges,
        independent of edge weights.
        """
        if not 0 <= i < self.n_users:
            raise IndexError(f"user index {i} out of range")
        if d < 0:
            raise ValueError("hop count must be nonnegative")
        visited = {int(i)}
        frontier = [int(i)]
        for _ in range(d):
            nxt = []
            for v in frontier:
                for s in self._in_sources[v]:
                    s = int(s)
                    if s not in visited:
                        visited.add(s)
                        nxt.append(s)
            if not nxt:
                break
            frontier = nxt
        return visited

    def average_in_degree(self):
        """Mean number of incoming edges per user, self-loops excluded."""
        return self.n_edges / self.n_users

    def validate_rows(self, recommender_influence, tol=ROW_SUM_TOL):
        """Check A_ii + sum_j A_ij + B_i == 1 per user. Report-only."""
        b = np.asarray(recommender_influence, dtype=np.float64)
        if b.shape != (self.n_users,):
            raise GraphError("recommender influence must be one scalar per user")
        residuals = self.self_weights + self.in_weight_sums() + b - 1.0
        ok = np.abs(residuals) <= tol
        return RowValidation(residuals=residuals, ok=ok, passed=bool(ok.all()), tol=tol)

    def neighbor_matrix(self):
        """Cached (N, N) operator with entry [i, j] = A_ij (zero diagonal).

        Dense ndarray for small graphs, CSR otherwise; both support `@`.
        """
        if self._neighbor_op is None:
            mat = sp.csr_matrix(
                (self.edge_weights, (self.edge_dst, self.edge_src)),
                shape=(self.n_users, self.n_users),
            )
            self._neighbor_op = mat.toarray() if self.n_users <= _DENSE_LIMIT else mat
        return self._neighbor_op

    def binary_in_adjacency(self):
        """Cached CSR with [i, j] = 1 iff edge j -> i exists."""
        if self._binary_in is None:
            self._binary_in = sp.csr_matrix(
                (np.ones(self.n_edges), (self.edge_dst, self.edge_src)),
                shape=(self.n_users, self.n_users),
            )
        return self._binary_in

    def reach_within(self, d):
        """CSR reach matrix R with R[i, j] = 1 iff dist(j -> i) <= d."""
        if d < 0:
            raise ValueError("hop count must be nonnegative")
        n = self.n_users
        reach = sp.identity(n, format="csr")
        if d == 0 or self.n_edges == 0:
            return reach
        adj = self.binary_in_adjacency()
        for _ in range(d):
            grown = adj @ reach + reach
            grown.data[:] = 1.0
            if grown.nnz == reach.nnz:
                break
            reach = grown
        return reach

    def with_weights(self, self_weights, edge_weights):
        """Same topology, new influence weights."""
        return SocialGraph.from_arrays(
            self.n_users, self.edge_src, self.edge_dst, edge_weights, self_weights
        )
