"""Coupled user/creator opinion dynamics with recommender-mediated coupling.

Each step advances both populations synchronously from the time-t snapshot:

    u_i' = (1 - lam_i) * (A_ii u_i + sum_j A_ij u_j + B_i c_consumed) + lam_i u0_i
    c_j' = (1 - gam_j) * (E_j c_j + (C_j / |F_j|) sum_{i in F_j} u_i) + gam_j c0_j

where F_j is the audience of creator j under the current partition. A
creator with an empty audience reverts its audience mass to self-influence
for that step (E_j + C_j on its own opinion), which keeps the row stochastic
and models "no feedback received".

Every update is a convex combination, so opinions can never leave [-1, 1]^n
when the inputs respect the row constraints; this is asserted after every
step instead of clamping, so a violation surfaces a parameter bug.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import metrics as metrics_mod
from . import recommender as rec_mod


class DynamicsError(ValueError):
    pass


class OpinionBoundsError(RuntimeError):
    """An opinion left [-1, 1]^n; indicates inconsistent parameters."""


# substream tags for seed derivation; fixed so trajectories are reproducible
_CHOICE_STREAM = 1
_METRICS_STREAM = 2


def _check_box(name, arr):
    if np.any(np.abs(arr) > 1.0):
        raise DynamicsError(f"{name} must lie entrywise in [-1, 1]")


def _check_unit(name, arr):
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DynamicsError(f"{name} must lie in [0, 1]")


@dataclass
class UserPopulation:
    """Opinions, prejudices and per-user interaction parameters.

    Self-influence A_ii lives on the SocialGraph; recommender_influence is
    the scalar weight B_i placed on whichever creator the user consumes.
    """

    opinions: np.ndarray               # (N, n)
    prejudices: np.ndarray             # (N, n)
    stubbornness: np.ndarray           # (N,) lambda_i
    recommender_influence: np.ndarray  # (N,) B_i

    def __post_init__(self):
        self.opinions = np.asarray(self.opinions, dtype=np.float64)
        self.prejudices = np.asarray(self.prejudices, dtype=np.float64)
        self.stubbornness = np.asarray(self.stubbornness, dtype=np.float64)
        self.recommender_influence = np.asarray(self.recommender_influence, dtype=np.float64)
        if self.opinions.ndim != 2 or self.opinions.shape != self.prejudices.shape:
            raise DynamicsError("opinions and prejudices must be matching (N, n) matrices")
        _check_box("user opinions", self.opinions)
        _check_box("user prejudices", self.prejudices)
        _check_unit("user stubbornness", self.stubbornness)
        _check_unit("recommender influence", self.recommender_influence)

    @property
    def n_users(self):
        return self.opinions.shape[0]

    @property
    def n_topics(self):
        return self.opinions.shape[1]

    def with_opinions(self, opinions):
        return UserPopulation(opinions, self.prejudices, self.stubbornness,
                              self.recommender_influence)


@dataclass
class CreatorPopulation:
    opinions: np.ndarray            # (M, n)
    prejudices: np.ndarray          # (M, n)
    stubbornness: np.ndarray        # (M,) gamma_j
    self_influence: np.ndarray      # (M,) E_j
    audience_influence: np.ndarray  # (M,) C_j, split evenly over the audience

    def __post_init__(self):
        self.opinions = np.asarray(self.opinions, dtype=np.float64)
        self.prejudices = np.asarray(self.prejudices, dtype=np.float64)
        self.stubbornness = np.asarray(self.stubbornness, dtype=np.float64)
        self.self_influence = np.asarray(self.self_influence, dtype=np.float64)
        self.audience_influence = np.asarray(self.audience_influence, dtype=np.float64)
        if self.opinions.ndim != 2 or self.opinions.shape != self.prejudices.shape:
            raise DynamicsError("opinions and prejudices must be matching (M, n) matrices")
        _check_box("creator opinions", self.opinions)
        _check_box("creator prejudices", self.prejudices)
        _check_unit("creator stubbornness", self.stubbornness)
        _check_unit("creator self-influence", self.self_influence)
        _check_unit("creator audience influence", self.audience_influence)

    @property
    def n_creators(self):
        return self.opinions.shape[0]

    @property
    def n_topics(self):
        return self.opinions.shape[1]

    def with_opinions(self, opinions):
        return CreatorPopulation(opinions, self.prejudices, self.stubbornness,
                                 self.self_influence, self.audience_influence)


@dataclass
class Partition:
    """Assignment of each user to the creator it consumed at one step."""

    assignment: np.ndarray  # (N,) creator index per user
    n_creators: int

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.assignment.ndim != 1:
            raise DynamicsError("assignment must be a flat per-user vector")
        if self.assignment.size and (
            self.assignment.min() < 0 or self.assignment.max() >= self.n_creators
        ):
            raise DynamicsError("assignment contains an invalid creator index")

    @property
    def audience_sizes(self):
        return np.bincount(self.assignment, minlength=self.n_creators)

    def audiences(self):
        """List of user-index arrays, one per creator."""
        order = np.argsort(self.assignment, kind="stable")
        sizes = self.audience_sizes
        bounds = np.concatenate(([0], np.cumsum(sizes)))
        return [order[bounds[j]:bounds[j + 1]] for j in range(self.n_creators)]


def build_partition(choices, n_creators):
    return Partition(np.asarray(choices), int(n_creators))


def user_step(users, graph, creators, partition):
    """One synchronous opinion update for every user; returns (N, n)."""
    opinions = users.opinions
    if opinions.shape[1] != creators.opinions.shape[1]:
        raise DynamicsError("user and creator opinion dimensions differ")
    consumed = creators.opinions[partition.assignment]
    mix = graph.neighbor_matrix() @ opinions
    mix += graph.self_weights[:, None] * opinions
    mix += users.recommender_influence[:, None] * consumed
    lam = users.stubbornness[:, None]
    return (1.0 - lam) * mix + lam * users.prejudices


def creator_step(creators, users, partition):
    """One synchronous opinion update for every creator; returns (M, n)."""
    opinions = users.opinions
    if opinions.shape[1] != creators.opinions.shape[1]:
        raise DynamicsError("user and creator opinion dimensions differ")
    m = creators.opinions.shape[0]
    assignment = partition.assignment
    counts = np.bincount(assignment, minlength=m)
    sums = np.empty((m, opinions.shape[1]))
    for topic in range(opinions.shape[1]):
        sums[:, topic] = np.bincount(assignment, weights=opinions[:, topic], minlength=m)

    empty = counts == 0
    per_user_w = creators.audience_influence / np.maximum(counts, 1)
    self_w = creators.self_influence
    if empty.any():
        # empty audience: the C_j mass reverts to self-influence for this step
        per_user_w = np.where(empty, 0.0, per_user_w)
        self_w = self_w + np.where(empty, creators.audience_influence, 0.0)
    mix = self_w[:, None] * creators.opinions + per_user_w[:, None] * sums
    gam = creators.stubbornness[:, None]
    return (1.0 - gam) * mix + gam * creators.prejudices


def choice_rng(seed, t, i):
    """Per-(seed, step, user) generator so user-level parallelism stays
    deterministic."""
    return np.random.default_rng(np.random.SeedSequence((seed, _CHOICE_STREAM, t, i)))


def metrics_seed(seed, t):
    return np.random.SeedSequence((seed, _METRICS_STREAM, t))


@dataclass
class Trajectory:
    """Full history of one simulation run."""

    user_opinions: np.ndarray    # (T+1, N, n)
    creator_opinions: np.ndarray  # (T+1, M, n)
    assignments: np.ndarray      # (T, N) creator consumed at step t
    distances: np.ndarray        # (T, N) ||u_i^t - c_consumed^t|| at choice time
    metrics: metrics_mod.MetricsSeries
    seed: int

    @property
    def horizon(self):
        return self.assignments.shape[0]

    def consumed_opinions(self):
        """(T, N, n) stack of consumed creator opinions at choice time."""
        steps = np.arange(self.horizon)
        return self.creator_opinions[steps[:, None], self.assignments, :]

    def consumption_records(self):
        """Yield (t, user, creator, distance) rows, enough to replay
        satisfaction offline."""
        for t in range(self.horizon):
            for i in range(self.assignments.shape[1]):
                yield t, i, int(self.assignments[t, i]), float(self.distances[t, i])


def _assert_bounds(kind, arr, t):
    if np.any(np.abs(arr) > 1.0):
        worst = float(np.abs(arr).max())
        raise OpinionBoundsError(
            f"{kind} opinion left [-1, 1] at step {t} (max magnitude {worst!r}); "
            "check the row constraints of the supplied parameters"
        )


def simulate(graph, users, creators, rs, horizon, seed,
             metrics_every=1, compute_metrics=True, k_range=None):
    """Run the closed loop for `horizon` steps; deterministic given seed.

    Per-step order: the recommender builds references and candidate sets
    from the time-t state, each user samples one creator, the partition is
    assembled, then both populations advance synchronously. Metrics rows are
    recorded at t = 0 and after every step that lands on the metrics grid.
    """
    if horizon < 0:
        raise DynamicsError("horizon must be nonnegative")
    if metrics_every < 1:
        raise DynamicsError("metrics_every must be at least 1")
    n_users, n_topics = users.opinions.shape
    m = creators.n_creators
    if rs.k > m:
        raise DynamicsError(f"candidate set size k={rs.k} exceeds {m} creators")

    ref_op = rec_mod.reference_matrix(graph, rs.d) if rs.d > 0 else None

    user_traj = np.empty((horizon + 1, n_users, n_topics))
    creator_traj = np.empty((horizon + 1, m, n_topics))
    assignments = np.empty((horizon, n_users), dtype=np.int64)
    distances = np.empty((horizon, n_users))
    user_traj[0] = users.opinions
    creator_traj[0] = creators.opinions

    series = metrics_mod.MetricsSeries()

    def record(t):
        if not compute_metrics:
            return
        cl = metrics_mod.global_clusterization(
            user_traj[t], metrics_seed(seed, t), k_range=k_range
        )
        if t == 0:
            running, instant, variance = 0.0, 0.0, 0.0
        else:
            per_user = -distances[:t].mean(axis=0)
            running = float(per_user.mean())
            variance = float(per_user.var())
            instant = float(-distances[t - 1].mean())
        series.append(metrics_mod.MetricsRow(
            t=t, sat_running=running, sat_instant=instant, sat_variance=variance,
            clusterization=cl.value, chosen_k=cl.chosen_k, sil_variance=cl.variance,
        ))

    record(0)

    # shallow working copies: parameters are fixed for the whole run, so the
    # loop swaps opinion arrays instead of re-validating populations per step
    cur_users = dataclasses.replace(users)
    cur_creators = dataclasses.replace(creators)
    for t in range(horizon):
        refs = cur_users.opinions if ref_op is None else np.asarray(ref_op @ cur_users.opinions)
        candidates = rec_mod.topk_candidates_all(refs, cur_creators.opinions, rs.k)

        choices = np.empty(n_users, dtype=np.int64)
        for i in range(n_users):
            anchor = cur_users.opinions[i] if rs.score_basis == "distance_to_user" else refs[i]
            choices[i] = rec_mod.sample_choice(
                anchor, candidates[i], cur_creators.opinions, rs.temperature,
                choice_rng(seed, t, i),
            )
        partition = build_partition(choices, m)
        assignments[t] = choices
        distances[t] = np.linalg.norm(
            cur_users.opinions - cur_creators.opinions[choices], axis=1
        )

        new_u = user_step(cur_users, graph, cur_creators, partition)
        new_c = creator_step(cur_creators, cur_users, partition)
        _assert_bounds("user", new_u, t)
        _assert_bounds("creator", new_c, t)

        cur_users.opinions = new_u
        cur_creators.opinions = new_c
        user_traj[t + 1] = new_u
        creator_traj[t + 1] = new_c
        if (t + 1) % metrics_every == 0:
            record(t + 1)

    return Trajectory(
        user_opinions=user_traj,
        creator_opinions=creator_traj,
        assignments=assignments,
        distances=distances,
        metrics=series,
        seed=seed,
    )
