"""Two-stage content curation: reference point, top-k shortlist, softmax choice.

Stage one computes a per-user recommendation reference: the user's own
opinion for the greedy strategy (d = 0), or the mean opinion of the user's
d-hop influencer set for the socially-aware strategy. Stage two shortlists
the k creators closest to the reference, from which the user samples one
piece of content with a distance-based softmax (confirmation bias: closer
content is more likely to be picked).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SCORE_BASES = ("distance_to_user", "distance_to_reference")


@dataclass(frozen=True)
class RecommenderConfig:
    """d = 0 is the greedy strategy; d > 0 averages over d-hop influencers."""

    d: int = 0
    k: int = 5
    temperature: float = 0.5
    score_basis: str = "distance_to_user"

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("hop depth d must be nonnegative")
        if self.k < 1:
            raise ValueError("candidate set size k must be at least 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.score_basis not in SCORE_BASES:
            raise ValueError(f"score_basis must be one of {SCORE_BASES}")

    @property
    def strategy(self):
        return "greedy" if self.d == 0 else "d_hop"


def reference(users, graph, i, config):
    """Recommendation reference for user i: mean opinion over in_i(d)."""
    if config.d == 0:
        return users.opinions[i].copy()
    members = sorted(graph.d_hop_influencers(i, config.d))
    return users.opinions[members].mean(axis=0)


def reference_matrix(graph, d):
    """(N, N) row-stochastic operator S with S @ U giving all references.

    Row i spreads weight 1/|in_i(d)| over the d-hop influencer set of i.
    The graph is static, so this is computed once per simulation.
    """
    reach = graph.reach_within(d).tocsr()
    sizes = np.asarray(reach.sum(axis=1)).ravel()
    inv = sp_row_scale(reach, 1.0 / sizes)
    return inv


def sp_row_scale(csr, factors):
    out = csr.copy()
    out.data *= np.repeat(factors, np.diff(csr.indptr))
    return out


def topk_candidates(ref, creator_opinions, k):
    """Indices of the k creators nearest to ref, ascending by distance.

    Ties break toward the lower creator index.
    """
    m = creator_opinions.shape[0]
    if k > m:
        raise ValueError(f"k={k} exceeds the number of creators ({m})")
    dists = np.linalg.norm(creator_opinions - ref, axis=1)
    return np.argsort(dists, kind="stable")[:k]


def topk_candidates_all(refs, creator_opinions, k):
    """Vectorized top-k for every user at once; rows match topk_candidates."""
    m = creator_opinions.shape[0]
    if k > m:
        raise ValueError(f"k={k} exceeds the number of creators ({m})")
    diff = refs[:, None, :] - creator_opinions[None, :, :]
    dists = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return np.argsort(dists, axis=1, kind="stable")[:, :k]


def choice_probabilities(anchor, candidates, creator_opinions, temperature):
    """Softmax over negative distances to the anchor point.

    Distances are shifted by their minimum before exponentiation so the
    largest weight is exactly 1.
    """
    dists = np.linalg.norm(creator_opinions[candidates] - anchor, axis=1)
    shifted = dists - dists.min()
    weights = np.exp(-shifted / temperature)
    return weights / weights.sum()


def sample_choice(anchor, candidates, creator_opinions, temperature, rng):
    """Sample one creator index from the candidate shortlist.

    Probability of candidate j is proportional to
    exp(-||c_j - anchor||_2 / temperature); anchor is the user's own opinion
    under the default scoring.
    """
    candidates = np.asarray(candidates)
    if candidates.size == 0:
        raise ValueError("candidate set is empty")
    if candidates.size == 1:
        return int(candidates[0])
    probs = choice_probabilities(anchor, candidates, creator_opinions, temperature)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return int(candidates[min(idx, candidates.size - 1)])
