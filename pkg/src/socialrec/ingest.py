"""Real-network ingestion: edge lists, spectral communities, seeded opinions.

Edge lists follow the plain-text convention of the SNAP collection: one
whitespace-separated integer pair per line, '#' comment lines ignored. Input
edges are treated as undirected and expanded to both directions; node IDs
are remapped to dense 0..N-1 indices with the mapping retained.

Community detection builds the symmetric normalized Laplacian of the
unweighted skeleton and finds its bottom-K eigenspace with block orthogonal
iteration (no external eigensolver on the big matrix); the row-normalized
embedding is clustered with k-means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import metrics as metrics_mod
from .graph import SocialGraph


class IngestError(ValueError):
    pass


class SpectralConvergenceError(RuntimeError):
    """Orthogonal iteration did not converge; partial results are rejected."""


@dataclass
class CommunityAssignment:
    labels: np.ndarray               # (N,) community index in 0..K-1
    centers: np.ndarray | None = None  # (K, n) opinion centers in [0, 1]^n
    eigenvalues: np.ndarray | None = None  # bottom-K Laplacian eigenvalues
    residuals: np.ndarray | None = None    # ||L v - lambda v|| / ||v|| per pair

    @property
    def n_communities(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0


def load_edge_list(path):
    """Parse a SNAP-style edge list into a SocialGraph plus the ID mapping.

    Returns (graph, id_map) where id_map maps original node IDs to dense
    indices. Undirected lines become two directed edges; duplicates and
    self-pairs are dropped. Edge weights are left at zero for the parameter
    sampler; self-influence defaults to 1.
    """
    pairs = set()
    nodes = set()
    n_lines = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise IngestError(f"{path}:{lineno}: expected two node IDs, got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: non-integer node ID in {line!r}") from exc
            n_lines += 1
            if a == b:
                continue
            nodes.add(a)
            nodes.add(b)
            pairs.add((min(a, b), max(a, b)))
    if n_lines == 0:
        raise IngestError(f"{path}: no edges found")

    id_map = {orig: dense for dense, orig in enumerate(sorted(nodes))}
    n = len(id_map)
    src = np.empty(2 * len(pairs), dtype=np.int64)
    dst = np.empty(2 * len(pairs), dtype=np.int64)
    for idx, (a, b) in enumerate(sorted(pairs)):
        i, j = id_map[a], id_map[b]
        src[2 * idx], dst[2 * idx] = i, j
        src[2 * idx + 1], dst[2 * idx + 1] = j, i
    graph = SocialGraph.from_arrays(n, src, dst, np.zeros(src.size), np.ones(n))
    return graph, id_map


def _normalized_adjacency(graph):
    """D^{-1/2} A D^{-1/2} over the undirected unit-weight skeleton."""
    n = graph.n_users
    adj = sp.csr_matrix(
        (np.ones(graph.n_edges), (graph.edge_dst, graph.edge_src)), shape=(n, n)
    )
    adj = adj.maximum(adj.T)  # symmetrize; loader output is already symmetric
    deg = np.asarray(adj.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        dinv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.maximum(deg, 1e-300)), 0.0)
    scale = sp.diags(dinv_sqrt)
    return scale @ adj @ scale


def bottom_eigenpairs(graph, k, seed=0, tol=1e-6, max_iter=2000, residual_tol=1e-5):
    """Bottom-k eigenpairs of the symmetric normalized Laplacian.

    Block orthogonal iteration on the shifted operator 2I - L (whose top
    eigenspace is L's bottom one) with Rayleigh-Ritz extraction. Converged
    when the Ritz values settle below `tol` and every eigenpair residual
    ||L v - lambda v|| / ||v|| is below `residual_tol`; raises if that never
    happens within max_iter sweeps (partial results are rejected).
    """
    n = graph.n_users
    if not 1 <= k <= n:
        raise IngestError(f"community count must satisfy 1 <= K <= {n}")
    norm_adj = _normalized_adjacency(graph)

    rng = np.random.default_rng(np.random.SeedSequence((seed, 7)))
    q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    prev_vals = None
    for _ in range(max_iter):
        y = q + norm_adj @ q                 # (2I - L) q
        small = q.T @ y
        small = 0.5 * (small + small.T)
        vals, vecs = np.linalg.eigh(small)   # ascending; top of 2I - L is last
        order = np.argsort(vals)[::-1]
        vals, vecs = vals[order], vecs[:, order]

        settled = prev_vals is not None and np.abs(vals - prev_vals).max() < tol
        if settled:
            # Ritz residuals from quantities already at hand:
            # L v = (2q - y) @ vecs and v = q @ vecs with unit columns.
            ritz = q @ vecs
            residual = (2.0 * q - y) @ vecs - ritz * (2.0 - vals)[None, :]
            if np.linalg.norm(residual, axis=0).max() <= residual_tol:
                return 2.0 - vals, ritz      # Laplacian eigenvalues, ascending
        prev_vals = vals
        q, _ = np.linalg.qr(y)
    raise SpectralConvergenceError(
        f"eigenpairs did not converge within {max_iter} iterations "
        f"(tol {tol}, residual tol {residual_tol})"
    )


def laplacian_residuals(graph, eigenvalues, vectors):
    """||L v - lambda v|| / ||v|| for each computed pair."""
    norm_adj = _normalized_adjacency(graph)
    lv = vectors - norm_adj @ vectors  # L v = (I - D^{-1/2} A D^{-1/2}) v
    res = lv - vectors * eigenvalues[None, :]
    return np.linalg.norm(res, axis=0) / np.linalg.norm(vectors, axis=0)


def spectral_communities(graph, n_communities, seed=0, tol=1e-6, max_iter=2000):
    """Assign every user to one of n_communities via spectral clustering."""
    if n_communities == 1:
        return CommunityAssignment(labels=np.zeros(graph.n_users, dtype=np.int64))
    eigenvalues, vectors = bottom_eigenpairs(
        graph, n_communities, seed=seed, tol=tol, max_iter=max_iter
    )
    residuals = laplacian_residuals(graph, eigenvalues, vectors)

    norms = np.linalg.norm(vectors, axis=1)
    embedding = vectors / np.where(norms > 0, norms, 1.0)[:, None]
    model = metrics_mod.kmeans(
        embedding, n_communities,
        np.random.default_rng(np.random.SeedSequence((seed, 8))),
    )
    return CommunityAssignment(
        labels=model.labels,
        eigenvalues=eigenvalues,
        residuals=residuals,
    )


def sample_community_centers(n_communities, n_topics, rng):
    """Community opinion centers dispersed uniformly in [0, 1]^n."""
    return rng.uniform(0.0, 1.0, (n_communities, n_topics))


def init_opinions_from_communities(assignment, rng, sigma=0.15, n_topics=None):
    """Center-plus-noise opinions: u_i = center[community(i)] + N(0, sigma).

    sigma is the per-coordinate standard deviation. Results are clamped to
    [-1, 1] entrywise since the noise can leave the box.
    """
    if assignment.centers is None:
        raise IngestError("assignment has no community centers; sample them first")
    centers = np.asarray(assignment.centers, dtype=np.float64)
    if n_topics is not None and centers.shape[1] != n_topics:
        raise IngestError("center dimension does not match requested topic count")
    base = centers[assignment.labels]
    noise = rng.normal(0.0, sigma, base.shape)
    return np.clip(base + noise, -1.0, 1.0)
