import dataclasses

import numpy as np
import pytest

from socialrec import dynamics as dyn
from socialrec import synthgen
from socialrec.dynamics import (
    CreatorPopulation,
    DynamicsError,
    Partition,
    UserPopulation,
    build_partition,
    creator_step,
    simulate,
    user_step,
)
from socialrec.graph import SocialGraph
from socialrec.recommender import RecommenderConfig


def two_user_world():
    graph = SocialGraph(2, [(1, 0, 0.1), (0, 1, 0.1)], [0.7, 0.7])
    users = UserPopulation(
        opinions=np.array([[0.5], [-0.5]]),
        prejudices=np.array([[0.5], [-0.5]]),
        stubbornness=np.array([0.2, 0.2]),
        recommender_influence=np.array([0.2, 0.2]),
    )
    creators = CreatorPopulation(
        opinions=np.array([[1.0]]),
        prejudices=np.array([[1.0]]),
        stubbornness=np.array([0.5]),
        self_influence=np.array([0.6]),
        audience_influence=np.array([0.4]),
    )
    return graph, users, creators


def synthetic_world(seed, n_users=40, n_creators=6, n_topics=2, delta=3.0):
    root = np.random.SeedSequence((seed, 55))
    r_u, r_g, r_p, r_c = [np.random.default_rng(s) for s in root.spawn(4)]
    u0 = synthgen.init_opinions_uniform(n_users, n_topics, r_u)
    graph = synthgen.generate_homophily_graph(u0, delta, r_g)
    user_params, creator_params, graph = synthgen.sample_params(graph, n_creators, r_p)
    c0 = synthgen.init_opinions_uniform(n_creators, n_topics, r_c)
    users = UserPopulation(u0, u0.copy(), user_params.stubbornness,
                           user_params.recommender_influence)
    creators = CreatorPopulation(c0, c0.copy(), creator_params.stubbornness,
                                 creator_params.self_influence,
                                 creator_params.audience_influence)
    return graph, users, creators


class TestUserStep:
    def test_hand_example(self):
        graph, users, creators = two_user_world()
        part = build_partition([0, 0], 1)
        out = user_step(users, graph, creators, part)
        assert out[0, 0] == pytest.approx(0.5)
        assert out[1, 0] == pytest.approx(-0.18)

    def test_full_stubbornness_freezes(self):
        graph, users, creators = two_user_world()
        users = dataclasses.replace(users, stubbornness=np.array([1.0, 1.0]))
        out = user_step(users, graph, creators, build_partition([0, 0], 1))
        assert np.array_equal(out, users.prejudices)

    def test_identity_dynamics(self):
        graph = SocialGraph(1, [], [1.0])
        users = UserPopulation(np.array([[0.3]]), np.array([[0.3]]),
                               np.array([0.0]), np.array([0.0]))
        creators = CreatorPopulation(np.array([[0.9]]), np.array([[0.9]]),
                                     np.array([0.5]), np.array([1.0]), np.array([0.0]))
        out = user_step(users, graph, creators, build_partition([0], 1))
        assert np.allclose(out, users.opinions)

    def test_dimension_mismatch(self):
        graph, users, creators = two_user_world()
        wide = CreatorPopulation(np.zeros((1, 2)), np.zeros((1, 2)), np.array([0.5]),
                                 np.array([0.6]), np.array([0.4]))
        with pytest.raises(DynamicsError):
            user_step(users, graph, wide, build_partition([0, 0], 1))


class TestCreatorStep:
    def test_hand_example(self):
        users = UserPopulation(np.array([[1.0], [0.5]]), np.array([[1.0], [0.5]]),
                               np.array([0.1, 0.1]), np.array([0.2, 0.2]))
        creators = CreatorPopulation(np.array([[0.0]]), np.array([[0.0]]),
                                     np.array([0.5]), np.array([0.6]), np.array([0.4]))
        out = creator_step(creators, users, build_partition([0, 0], 1))
        assert out[0, 0] == pytest.approx(0.15)

    def test_stubborn_creator_frozen(self):
        users = UserPopulation(np.array([[1.0]]), np.array([[1.0]]),
                               np.array([0.2]), np.array([0.2]))
        creators = CreatorPopulation(np.array([[-0.4]]), np.array([[-0.7]]),
                                     np.array([1.0]), np.array([0.6]), np.array([0.4]))
        out = creator_step(creators, users, build_partition([0], 1))
        assert np.allclose(out, creators.prejudices)

    def test_fixed_point_when_audience_agrees(self):
        point = np.array([[0.25]])
        users = UserPopulation(point, point.copy(), np.array([0.3]), np.array([0.2]))
        creators = CreatorPopulation(point.copy(), point.copy(), np.array([0.4]),
                                     np.array([0.7]), np.array([0.3]))
        out = creator_step(creators, users, build_partition([0], 1))
        assert np.allclose(out, point)

    def test_empty_audience_reverts_to_self(self):
        users = UserPopulation(np.array([[1.0]]), np.array([[1.0]]),
                               np.array([0.2]), np.array([0.2]))
        creators = CreatorPopulation(
            np.array([[0.5], [-0.5]]), np.array([[0.1], [-0.1]]),
            np.array([0.25, 0.25]), np.array([0.6, 0.6]), np.array([0.4, 0.4]),
        )
        out = creator_step(creators, users, build_partition([0], 2))
        # creator 1 has no audience: (1 - .25) * (0.6 + 0.4) * (-0.5) + .25 * (-0.1)
        assert out[1, 0] == pytest.approx(0.75 * -0.5 + 0.25 * -0.1)


class TestPartition:
    def test_all_users_one_creator(self):
        part = build_partition([0, 0, 0], 3)
        assert list(part.audience_sizes) == [3, 0, 0]
        audiences = part.audiences()
        assert list(audiences[0]) == [0, 1, 2]
        assert audiences[1].size == 0

    def test_mixed_choices(self):
        part = build_partition([0, 1, 0], 2)
        assert list(part.audiences()[0]) == [0, 2]
        assert list(part.audiences()[1]) == [1]
        assert part.audience_sizes.sum() == 3

    def test_invalid_creator_index(self):
        with pytest.raises(DynamicsError):
            build_partition([0, 2], 2)
        with pytest.raises(DynamicsError):
            build_partition([-1], 2)


class TestSimulate:
    def test_zero_horizon_keeps_initial_state(self):
        graph, users, creators = synthetic_world(0)
        traj = simulate(graph, users, creators, RecommenderConfig(k=2), 0, seed=0)
        assert traj.user_opinions.shape[0] == 1
        assert len(traj.metrics) == 1
        assert traj.metrics.rows[0].t == 0
        assert np.array_equal(traj.user_opinions[0], users.opinions)

    def test_frozen_populations_stay_constant(self):
        graph, users, creators = synthetic_world(1)
        users = dataclasses.replace(users, stubbornness=np.ones(users.n_users))
        creators = dataclasses.replace(creators, stubbornness=np.ones(creators.n_creators))
        traj = simulate(graph, users, creators, RecommenderConfig(k=2), 5, seed=1,
                        compute_metrics=False)
        for t in range(6):
            assert np.allclose(traj.user_opinions[t], users.prejudices)
            assert np.allclose(traj.creator_opinions[t], creators.prejudices)

    def test_deterministic_given_seed(self):
        graph, users, creators = synthetic_world(2)
        a = simulate(graph, users, creators, RecommenderConfig(k=3), 8, seed=42)
        b = simulate(graph, users, creators, RecommenderConfig(k=3), 8, seed=42)
        assert np.array_equal(a.user_opinions, b.user_opinions)
        assert np.array_equal(a.assignments, b.assignments)
        assert [r.clusterization for r in a.metrics] == [r.clusterization for r in b.metrics]

    def test_different_seeds_diverge(self):
        graph, users, creators = synthetic_world(2)
        a = simulate(graph, users, creators, RecommenderConfig(k=3), 8, seed=1,
                     compute_metrics=False)
        b = simulate(graph, users, creators, RecommenderConfig(k=3), 8, seed=2,
                     compute_metrics=False)
        assert not np.array_equal(a.assignments, b.assignments)

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("d", [0, 3])
    def test_opinions_stay_in_box(self, seed, d):
        graph, users, creators = synthetic_world(seed)
        traj = simulate(graph, users, creators, RecommenderConfig(d=d, k=3), 30,
                        seed=seed, compute_metrics=False)
        assert np.abs(traj.user_opinions).max() <= 1.0
        assert np.abs(traj.creator_opinions).max() <= 1.0

    def test_partition_matches_recorded_choices(self):
        graph, users, creators = synthetic_world(4)
        traj = simulate(graph, users, creators, RecommenderConfig(k=3), 6, seed=7,
                        compute_metrics=False)
        # replay: distances logged at choice time must match the trajectory
        for t in range(6):
            consumed = traj.creator_opinions[t][traj.assignments[t]]
            dist = np.linalg.norm(traj.user_opinions[t] - consumed, axis=1)
            assert np.allclose(dist, traj.distances[t])

    def test_metrics_row_count(self):
        graph, users, creators = synthetic_world(5, n_users=20, n_creators=3)
        traj = simulate(graph, users, creators, RecommenderConfig(k=2), 10, seed=3,
                        metrics_every=3)
        assert [row.t for row in traj.metrics] == [0, 3, 6, 9]

    def test_permutation_equivariance_of_steps(self):
        # permuting users and all per-user arrays permutes the update output
        graph, users, creators = synthetic_world(6, n_users=15, n_creators=3)
        part = build_partition(np.arange(15) % 3, 3)
        perm = np.random.default_rng(0).permutation(15)

        inv = np.empty(15, dtype=int)
        inv[perm] = np.arange(15)
        remap = {int(old): int(new) for new, old in enumerate(perm)}
        edges = [(remap[int(s)], remap[int(d)], float(w)) for s, d, w in
                 zip(graph.edge_src, graph.edge_dst, graph.edge_weights)]
        pgraph = SocialGraph(15, edges, graph.self_weights[perm])
        pusers = UserPopulation(users.opinions[perm], users.prejudices[perm],
                                users.stubbornness[perm],
                                users.recommender_influence[perm])
        ppart = build_partition(part.assignment[perm], 3)

        base_u = user_step(users, graph, creators, part)
        base_c = creator_step(creators, users, part)
        perm_u = user_step(pusers, pgraph, creators, ppart)
        perm_c = creator_step(creators, pusers, ppart)
        assert np.allclose(perm_u, base_u[perm])
        assert np.allclose(perm_c, base_c)

    def test_static_partition_converges(self):
        # with every agent somewhat stubborn the frozen map is a contraction
        graph, users, creators = synthetic_world(7, n_users=25, n_creators=4)
        users = dataclasses.replace(
            users, stubbornness=np.maximum(users.stubbornness, 0.05))
        creators = dataclasses.replace(
            creators, stubbornness=np.maximum(creators.stubbornness, 0.05))
        part = build_partition(np.arange(25) % 4, 4)
        cur_u, cur_c = users, creators
        gap = None
        for _ in range(2000):
            new_u = user_step(cur_u, graph, cur_c, part)
            new_c = creator_step(cur_c, cur_u, part)
            gap = max(np.abs(new_u - cur_u.opinions).max(),
                      np.abs(new_c - cur_c.opinions).max())
            cur_u = cur_u.with_opinions(new_u)
            cur_c = cur_c.with_opinions(new_c)
        assert gap < 1e-12

    def test_consumed_opinions_shape(self):
        graph, users, creators = synthetic_world(8, n_users=10, n_creators=3)
        traj = simulate(graph, users, creators, RecommenderConfig(k=2), 4, seed=0,
                        compute_metrics=False)
        consumed = traj.consumed_opinions()
        assert consumed.shape == (4, 10, 2)
        assert np.allclose(
            np.linalg.norm(traj.user_opinions[:-1] - consumed, axis=2),
            traj.distances,
        )


class TestPopulationValidation:
    def test_rejects_out_of_box_opinions(self):
        with pytest.raises(DynamicsError):
            UserPopulation(np.array([[1.5]]), np.array([[0.0]]),
                           np.array([0.1]), np.array([0.1]))

    def test_rejects_bad_stubbornness(self):
        with pytest.raises(DynamicsError):
            CreatorPopulation(np.array([[0.0]]), np.array([[0.0]]),
                              np.array([1.2]), np.array([0.5]), np.array([0.5]))
