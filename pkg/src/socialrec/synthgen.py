"""Synthetic populations: uniform parameter sampling and homophily graphs.

Two sampling modes for neighbor influence are supported: "per_edge" draws an
independent weight for every incoming edge, "even_total" draws one total
neighbor mass per user and splits it evenly over the in-edges. In both modes
the recommender influence takes the row residual B_i = 1 - A_ii - sum_j A_ij,
so every sampled row is exactly stochastic once B_i is appended.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import SocialGraph


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class ParameterBounds:
    """Uniform sampling bounds, all within [0, 1]."""

    stubbornness: tuple = (0.0, 0.5)
    self_influence: tuple = (0.5, 0.8)
    recommender_influence: tuple = (0.2, 0.8)
    edge_weight: tuple = (0.025, 0.05)
    neighbor_total: tuple = (0.25, 0.5)
    creator_stubbornness: tuple = (0.0, 0.5)
    creator_self_influence: tuple = (0.5, 0.8)
    creator_audience_influence: tuple = (0.2, 0.8)

    def __post_init__(self):
        for name, (lo, hi) in self.__dict__.items():
            if not (0.0 <= lo <= hi <= 1.0):
                raise SamplingError(f"bounds for {name} must satisfy 0 <= lo <= hi <= 1")
        e_lo, e_hi = self.creator_self_influence
        c_lo, c_hi = self.creator_audience_influence
        # audience influence is the complement of creator self-influence
        if 1.0 - e_hi < c_lo - 1e-12 or 1.0 - e_lo > c_hi + 1e-12:
            raise SamplingError("creator self-influence bounds put C_j = 1 - E_j out of range")


DEFAULT_BOUNDS = ParameterBounds()


@dataclass
class UserParams:
    stubbornness: np.ndarray           # lambda_i per user
    recommender_influence: np.ndarray  # B_i per user


@dataclass
class CreatorParams:
    stubbornness: np.ndarray        # gamma_j per creator
    self_influence: np.ndarray      # E_j per creator
    audience_influence: np.ndarray  # C_j = 1 - E_j per creator


def sample_params(graph, n_creators, rng, bounds=DEFAULT_BOUNDS, mode="per_edge"):
    """Draw user/creator parameters and edge weights for a given topology.

    Returns (user_params, creator_params, weighted_graph). The returned graph
    shares the topology of the input but carries the sampled A_ii and A_ij;
    B_i is the row residual, pulled back to its nearest bound by rescaling
    the neighbor weights proportionally whenever it falls outside its range.
    """
    if mode not in ("per_edge", "even_total"):
        raise SamplingError(f"unknown sampling mode {mode!r}")
    n = graph.n_users
    b_lo, b_hi = bounds.recommender_influence
    if bounds.self_influence[1] + b_lo > 1.0 + 1e-12:
        raise SamplingError("self-influence upper bound leaves no room for recommender influence")

    lam = rng.uniform(*bounds.stubbornness, n)
    self_w = rng.uniform(*bounds.self_influence, n)

    in_deg = np.bincount(graph.edge_dst, minlength=n) if graph.n_edges else np.zeros(n, dtype=int)
    if mode == "per_edge":
        edge_w = rng.uniform(*bounds.edge_weight, graph.n_edges)
    else:
        totals = rng.uniform(*bounds.neighbor_total, n)
        edge_w = np.where(
            in_deg[graph.edge_dst] > 0, totals[graph.edge_dst] / in_deg[graph.edge_dst], 0.0
        )

    sums = (
        np.bincount(graph.edge_dst, weights=edge_w, minlength=n)
        if graph.n_edges
        else np.zeros(n)
    )
    rec = 1.0 - self_w - sums

    # Pull out-of-range residuals back to the nearest bound by rescaling the
    # neighbor mass; users without neighbors have nothing to rescale.
    low = rec < b_lo
    high = rec > b_hi
    for mask, bound in ((low, b_lo), (high, b_hi)):
        if not mask.any():
            continue
        stuck = mask & (in_deg == 0)
        if stuck.any():
            raise SamplingError(
                "recommender influence out of range for users without neighbors; "
                "bounds are infeasible"
            )
        target = 1.0 - self_w - bound  # required neighbor mass
        scale = np.ones(n)
        scale[mask] = target[mask] / sums[mask]
        edge_w = edge_w * scale[graph.edge_dst]
        rec[mask] = bound

    creator_self = rng.uniform(*bounds.creator_self_influence, n_creators)
    creator_stub = rng.uniform(*bounds.creator_stubbornness, n_creators)

    users = UserParams(stubbornness=lam, recommender_influence=rec)
    creators = CreatorParams(
        stubbornness=creator_stub,
        self_influence=creator_self,
        audience_influence=1.0 - creator_self,
    )
    return users, creators, graph.with_weights(self_w, edge_w)


def generate_homophily_graph(initial_opinions, delta, rng, chunk=512):
    """Random directed graph where similar users connect more often.

    Every ordered pair (j, i), j != i, receives an edge independently with
    probability exp(-delta * ||u_i - u_j||_2). Weights are placeholders
    (zero) until sample_params assigns them.

    Note: the connection probability uses the plain Euclidean distance, not
    its square; the squared form produces roughly four times the target
    connectivity at delta = 9.
    """
    if delta <= 0:
        raise SamplingError("delta must be positive")
    pts = np.asarray(initial_opinions, dtype=np.float64)
    if pts.ndim != 2:
        raise SamplingError("opinions must be an (n_agents, n_topics) matrix")
    n = pts.shape[0]

    src_parts, dst_parts = [], []
    # chunked over target rows; uniforms are consumed in row-major order so
    # the result does not depend on the chunk size
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = pts[start:stop, None, :] - pts[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        prob = np.exp(-delta * dist)
        draws = rng.uniform(0.0, 1.0, prob.shape)
        hit = draws < prob
        rows = np.arange(start, stop)
        hit[rows - start, rows] = False  # no self-loops
        tgt, s = np.nonzero(hit)
        dst_parts.append(tgt + start)
        src_parts.append(s)

    src = np.concatenate(src_parts) if src_parts else np.empty(0, dtype=np.int64)
    dst = np.concatenate(dst_parts) if dst_parts else np.empty(0, dtype=np.int64)
    return SocialGraph.from_arrays(n, src, dst, np.zeros(src.size), np.ones(n))


def init_opinions_uniform(n_agents, n_topics, rng):
    """Independent uniform opinions in [-1, 1]^n_topics."""
    return rng.uniform(-1.0, 1.0, (n_agents, n_topics))
