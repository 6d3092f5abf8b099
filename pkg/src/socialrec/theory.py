"""Numerical oracles for the frozen-partition dynamics.

With a static partition the coupled update is the affine map

    x' = J x + [lam u0; gam c0],   J = diag(I - Lam, I - Gam) @ [[A, B], [C, E]]

whose unique fixed point exists whenever the spectral radius of J is below 1
(guaranteed when every agent keeps some attachment to its prejudice). These
routines solve for that fixed point directly, independently of the
simulator's step code, so the two paths can check each other.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import dynamics as dyn
from . import recommender as rec_mod
from . import synthgen
from .graph import SocialGraph


class TheoryError(ValueError):
    pass


class UnstableSystemError(TheoryError):
    """Spectral radius too close to 1; the affine map has no usable fixed point."""


@dataclass
class FixedPointProblem:
    """Frozen-partition affine system, one block row per agent."""

    transition: np.ndarray  # (N+M, N+M) matrix J
    affine: np.ndarray      # (N+M, n) anchored prejudice term
    n_users: int
    n_creators: int

    @classmethod
    def from_state(cls, graph, users, creators, partition):
        """Assemble J and the affine term exactly as the step functions
        weigh them, including the empty-audience self-reversion."""
        n, m = users.n_users, creators.n_creators
        n_topics = users.n_topics
        size = n + m
        trans = np.zeros((size, size))

        one_minus_lam = 1.0 - users.stubbornness
        trans[np.arange(n), np.arange(n)] = one_minus_lam * graph.self_weights
        if graph.n_edges:
            trans[graph.edge_dst, graph.edge_src] = (
                one_minus_lam[graph.edge_dst] * graph.edge_weights
            )
        trans[np.arange(n), n + partition.assignment] = (
            one_minus_lam * users.recommender_influence
        )

        counts = partition.audience_sizes.astype(np.float64)
        one_minus_gam = 1.0 - creators.stubbornness
        has_audience = counts > 0
        self_share = np.where(
            has_audience,
            creators.self_influence,
            creators.self_influence + creators.audience_influence,
        )
        trans[n + np.arange(m), n + np.arange(m)] = one_minus_gam * self_share
        per_user = np.where(has_audience,
                            creators.audience_influence / np.maximum(counts, 1.0), 0.0)
        trans[n + partition.assignment, np.arange(n)] = (
            one_minus_gam[partition.assignment] * per_user[partition.assignment]
        )

        affine = np.vstack([
            users.stubbornness[:, None] * users.prejudices,
            creators.stubbornness[:, None] * creators.prejudices,
        ])
        assert affine.shape == (size, n_topics)
        return cls(transition=trans, affine=affine, n_users=n, n_creators=m)


def spectral_radius(matrix, iters=200, tol=1e-8, seed=0):
    """Dominant eigenvalue magnitude via power iteration."""
    n = matrix.shape[0]
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.5, 1.0, n)  # positive start vector suits nonnegative J
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iters):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new_estimate = norm
        v = w / norm
        if abs(new_estimate - estimate) < tol:
            return float(new_estimate)
        estimate = new_estimate
    return float(estimate)


def closed_form_equilibrium(problem):
    """Unique fixed point (u*, c*) of the frozen-partition dynamics.

    Solves (I - J) x = affine by dense factorization; refuses systems whose
    spectral radius is not safely below 1.
    """
    rho = spectral_radius(problem.transition)
    if rho >= 1.0 - 1e-6:
        raise UnstableSystemError(f"spectral radius {rho:.9f} is not below 1")
    size = problem.transition.shape[0]
    x = np.linalg.solve(np.eye(size) - problem.transition, problem.affine)
    return x[:problem.n_users], x[problem.n_users:]


def iterate_frozen(graph, users, creators, partition, steps):
    """Run the simulator's own step functions under a frozen partition.

    This is the second, independent route to the fixed point.
    """
    cur_u = dataclasses.replace(users)
    cur_c = dataclasses.replace(creators)
    for _ in range(steps):
        new_u = dyn.user_step(cur_u, graph, cur_c, partition)
        new_c = dyn.creator_step(cur_c, cur_u, partition)
        cur_u.opinions = new_u
        cur_c.opinions = new_c
    return cur_u.opinions, cur_c.opinions


def complementarity_check(graph, users, creators, partition, epsilon, user=None):
    """Check the row identity and the direction of the equilibrium shift.

    The identity A_ii + sum_j A_ij + B_i = 1 must hold to 1e-12 for every
    user. Moving mass epsilon from B_i to the neighbor weights (keeping the
    row sum) must move u*_i toward the neighborhood average and away from
    the consumed creator: the shift projected on (creator - neighbor mean)
    must be nonpositive.
    """
    sums = graph.in_weight_sums()
    residual = graph.self_weights + sums + users.recommender_influence - 1.0
    identity_max = float(np.abs(residual).max())
    identity_ok = identity_max <= 1e-12

    if user is None:
        candidates = [i for i in range(graph.n_users) if graph.in_neighbors(i).size > 0]
        if not candidates:
            raise TheoryError("no user has neighbors; perturbation undefined")
        user = candidates[0]
    elif graph.in_neighbors(user).size == 0:
        raise TheoryError(f"user {user} has no neighbors; perturbation undefined")

    base_problem = FixedPointProblem.from_state(graph, users, creators, partition)
    u_base, c_base = closed_form_equilibrium(base_problem)

    neighbor_sum = float(sums[user])
    if neighbor_sum <= 0.0:
        raise TheoryError(f"user {user} has zero incoming weight; perturbation undefined")
    if epsilon > users.recommender_influence[user]:
        raise TheoryError("epsilon exceeds the user's recommender influence")
    scale = (neighbor_sum + epsilon) / neighbor_sum
    new_edge_w = graph.edge_weights.copy()
    into_user = graph.edge_dst == user
    new_edge_w[into_user] *= scale
    new_rec = users.recommender_influence.copy()
    new_rec[user] -= epsilon

    perturbed_graph = graph.with_weights(graph.self_weights, new_edge_w)
    perturbed_users = dyn.UserPopulation(
        users.opinions, users.prejudices, users.stubbornness, new_rec
    )
    pert_problem = FixedPointProblem.from_state(
        perturbed_graph, perturbed_users, creators, partition
    )
    u_pert, _ = closed_form_equilibrium(pert_problem)

    neighbors = graph.in_neighbors(user)
    weights = graph.edge_weights[into_user]
    nb_mean = (weights[:, None] * u_base[neighbors]).sum(axis=0) / weights.sum()
    creator_at = c_base[partition.assignment[user]]
    direction = creator_at - nb_mean
    movement = float(np.dot(u_pert[user] - u_base[user], direction))
    directional_ok = movement <= 1e-12

    return {
        "identity_max_residual": identity_max,
        "identity_ok": identity_ok,
        "epsilon": float(epsilon),
        "perturbed_user": int(user),
        "movement_projection": movement,
        "directional_ok": bool(directional_ok),
        "passed": bool(identity_ok and directional_ok),
    }


@dataclass
class AlphaTrace:
    """Iterates of the per-step contraction ratio recursion."""

    eta: float
    values: np.ndarray

    @property
    def final(self):
        return float(self.values[-1])


def alpha_recursion(eta, alpha0, steps):
    """Iterate alpha' = 1 + eta - eta / alpha, starting inside [eta, 1].

    Computed in increment form alpha + (1 - alpha) * (alpha - eta) / alpha,
    which is algebraically identical, keeps both fixed points exact in
    floating point, and makes monotonicity explicit (the increment is
    nonnegative on [eta, 1]).
    """
    if not 0.0 < eta < 1.0:
        raise TheoryError("eta must lie strictly inside (0, 1)")
    if not eta <= alpha0 <= 1.0:
        raise TheoryError("alpha0 must lie in [eta, 1]")
    values = np.empty(steps + 1)
    values[0] = alpha = float(alpha0)
    for t in range(1, steps + 1):
        alpha = alpha + (1.0 - alpha) * (alpha - eta) / alpha
        if not eta <= alpha <= 1.0:
            raise TheoryError(f"alpha iterate {alpha!r} escaped [eta, 1] at step {t}")
        values[t] = alpha
    return AlphaTrace(eta=float(eta), values=values)


def _no_edge_graph(n_users, self_weights):
    return SocialGraph.from_arrays(
        n_users, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64),
        np.empty(0), self_weights,
    )


def build_lemma_world(n_users, n_creators, n_topics, seed,
                      bounds=synthgen.DEFAULT_BOUNDS):
    """Isolated users, stubborn creators: the static-partition regime.

    A is diagonal (no user-user edges) and every creator has stubbornness 1,
    so creators never move and B_i = 1 - A_ii for every user.
    """
    root = np.random.SeedSequence((seed, 101))
    r_opinion, r_params = [np.random.default_rng(s) for s in root.spawn(2)]
    graph = _no_edge_graph(n_users, np.ones(n_users))
    user_params, creator_params, graph = synthgen.sample_params(
        graph, n_creators, r_params, bounds=bounds
    )
    u0 = synthgen.init_opinions_uniform(n_users, n_topics, r_opinion)
    c0 = synthgen.init_opinions_uniform(n_creators, n_topics, r_opinion)
    users = dyn.UserPopulation(u0, u0.copy(), user_params.stubbornness,
                               user_params.recommender_influence)
    creators = dyn.CreatorPopulation(
        c0, c0.copy(), np.ones(n_creators),
        creator_params.self_influence, creator_params.audience_influence,
    )
    return graph, users, creators


def lemma1_scenario_check(n_users=50, n_creators=5, n_topics=2, horizon=200,
                          seed=0, ratio_tol=1e-12):
    """Greedy k=1 recommendations over isolated users and stubborn creators.

    Asserts that (a) the induced user partition never changes after the
    first step, (b) each user's distance to its creator is non-increasing,
    and (c) every per-step contraction ratio lies in
    [(1 - lam_i) A_ii - tol, 1 + tol].
    """
    graph, users, creators = build_lemma_world(n_users, n_creators, n_topics, seed)
    rs = rec_mod.RecommenderConfig(d=0, k=1, temperature=0.5)
    traj = dyn.simulate(graph, users, creators, rs, horizon, seed,
                        compute_metrics=False)

    static = bool((traj.assignments == traj.assignments[0]).all())

    chosen = traj.assignments[0]
    # creators are frozen here, so their time-0 opinions serve for every step
    dists = np.linalg.norm(
        traj.user_opinions - traj.creator_opinions[0][chosen][None, :, :], axis=2
    )

    diffs = dists[1:] - dists[:-1]
    monotone = bool((diffs <= ratio_tol).all())

    eta = (1.0 - users.stubbornness) * graph.self_weights
    prev, nxt = dists[:-1], dists[1:]
    live = prev > 1e-13  # ratio undefined once a user sits on its creator
    ratios = np.where(live, nxt / np.where(live, prev, 1.0), 1.0)
    lower_ok = ratios >= eta[None, :] - ratio_tol
    upper_ok = ratios <= 1.0 + ratio_tol
    ratio_ok = bool((lower_ok & upper_ok).all())

    worst_low = float((ratios - eta[None, :]).min())
    worst_high = float(ratios.max())
    return {
        "static_partition": static,
        "monotone_distances": monotone,
        "ratio_within_bounds": ratio_ok,
        "min_ratio_minus_eta": worst_low,
        "max_ratio": worst_high,
        "passed": bool(static and monotone and ratio_ok),
    }


def random_frozen_instance(n_users, n_creators, n_topics, seed,
                           min_stubbornness=0.05, edge_prob=0.15):
    """Random stable frozen-partition instance for fixed-point spot checks."""
    root = np.random.SeedSequence((seed, 202))
    r_graph, r_opinion, r_params, r_part = [np.random.default_rng(s) for s in root.spawn(4)]

    mask = r_graph.uniform(size=(n_users, n_users)) < edge_prob
    np.fill_diagonal(mask, False)
    dst, src = np.nonzero(mask)
    graph = SocialGraph.from_arrays(n_users, src, dst, np.zeros(src.size), np.ones(n_users))

    bounds = synthgen.ParameterBounds(
        stubbornness=(min_stubbornness, 0.5),
        creator_stubbornness=(min_stubbornness, 0.5),
    )
    user_params, creator_params, graph = synthgen.sample_params(
        graph, n_creators, r_params, bounds=bounds
    )
    u0 = synthgen.init_opinions_uniform(n_users, n_topics, r_opinion)
    c0 = synthgen.init_opinions_uniform(n_creators, n_topics, r_opinion)
    users = dyn.UserPopulation(u0, u0.copy(), user_params.stubbornness,
                               user_params.recommender_influence)
    creators = dyn.CreatorPopulation(
        c0, c0.copy(), creator_params.stubbornness,
        creator_params.self_influence, creator_params.audience_influence,
    )
    partition = dyn.build_partition(r_part.integers(0, n_creators, n_users), n_creators)
    return graph, users, creators, partition


def frozen_equilibrium_check(n_users=20, n_creators=3, n_topics=2, steps=10_000,
                             seed=0, tol=1e-8):
    """Long-horizon simulation vs closed form on one random instance."""
    graph, users, creators, partition = random_frozen_instance(
        n_users, n_creators, n_topics, seed
    )
    problem = FixedPointProblem.from_state(graph, users, creators, partition)
    u_star, c_star = closed_form_equilibrium(problem)
    u_sim, c_sim = iterate_frozen(graph, users, creators, partition, steps)
    gap = max(
        float(np.abs(u_sim - u_star).max()),
        float(np.abs(c_sim - c_star).max()),
    )
    return {"seed": seed, "max_gap": gap, "passed": bool(gap <= tol), "tol": tol}
