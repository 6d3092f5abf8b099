import numpy as np
import pytest

from socialrec import recommender as rec
from socialrec.dynamics import UserPopulation
from socialrec.graph import SocialGraph
from socialrec.recommender import RecommenderConfig


def make_users(opinions):
    opinions = np.asarray(opinions, dtype=np.float64)
    n = opinions.shape[0]
    return UserPopulation(opinions, opinions.copy(), np.full(n, 0.2), np.full(n, 0.2))


class TestReference:
    def test_d_zero_is_own_opinion(self):
        users = make_users([[0.3, -0.4], [0.1, 0.9]])
        graph = SocialGraph(2, [(0, 1, 0.1)], [0.7, 0.7])
        cfg = RecommenderConfig(d=0, k=1)
        assert np.array_equal(rec.reference(users, graph, 1, cfg), users.opinions[1])

    def test_star_mean_cancels(self):
        # four spokes at the unit cross all influence user 0 sitting at the origin
        opinions = [[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]]
        edges = [(j, 0, 0.05) for j in range(1, 5)]
        graph = SocialGraph(5, edges, np.full(5, 0.7))
        users = make_users(opinions)
        ref = rec.reference(users, graph, 0, RecommenderConfig(d=1, k=1))
        assert np.allclose(ref, [0.0, 0.0])

    def test_chain_two_hops(self):
        opinions = [[0.0], [0.6], [0.9]]
        graph = SocialGraph(3, [(0, 1, 0.05), (1, 2, 0.05)], np.full(3, 0.8))
        users = make_users(opinions)
        ref = rec.reference(users, graph, 2, RecommenderConfig(d=2, k=1))
        assert ref[0] == pytest.approx(0.5)

    @pytest.mark.parametrize("d", [0, 1, 2, 3])
    def test_matrix_path_matches_per_user(self, d):
        rng = np.random.default_rng(17)
        n = 12
        edges = [(j, i, 0.01) for j in range(n) for i in range(n)
                 if i != j and rng.random() < 0.25]
        graph = SocialGraph(n, edges, np.full(n, 0.5))
        users = make_users(rng.uniform(-1, 1, (n, 2)))
        cfg = RecommenderConfig(d=d, k=1)
        refs = np.asarray(rec.reference_matrix(graph, d) @ users.opinions)
        for i in range(n):
            assert np.allclose(refs[i], rec.reference(users, graph, i, cfg))


class TestTopK:
    def test_k_equals_m_sorts_everyone(self):
        creators = np.array([[0.5], [0.1], [0.9], [0.2]])
        order = rec.topk_candidates(np.array([0.0]), creators, 4)
        assert list(order) == [1, 3, 0, 2]

    def test_k_one_is_argmin(self):
        creators = np.array([[0.5], [0.1], [0.9]])
        assert list(rec.topk_candidates(np.array([0.0]), creators, 1)) == [1]

    def test_tie_breaks_by_index(self):
        creators = np.array([[0.3], [0.1], [-0.1], [0.5]])
        picked = rec.topk_candidates(np.array([0.0]), creators, 2)
        assert list(picked) == [1, 2]  # distances .3,.1,.1,.5; tie at .1 -> lower index

    def test_k_too_large(self):
        with pytest.raises(ValueError):
            rec.topk_candidates(np.array([0.0]), np.zeros((3, 1)), 4)

    def test_translation_invariance(self):
        rng = np.random.default_rng(3)
        creators = rng.uniform(-0.5, 0.5, (8, 2))
        ref = rng.uniform(-0.5, 0.5, 2)
        shift = np.array([0.17, -0.23])
        base = rec.topk_candidates(ref, creators, 4)
        shifted = rec.topk_candidates(ref + shift, creators + shift, 4)
        assert np.array_equal(base, shifted)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(5)
        creators = rng.uniform(-1, 1, (9, 3))
        refs = rng.uniform(-1, 1, (20, 3))
        stacked = rec.topk_candidates_all(refs, creators, 4)
        for i in range(20):
            assert np.array_equal(stacked[i], rec.topk_candidates(refs[i], creators, 4))


class TestSampleChoice:
    def test_single_candidate_is_certain(self):
        creators = np.array([[0.4], [0.6]])
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert rec.sample_choice(np.array([0.0]), [1], creators, 0.5, rng) == 1

    def test_equidistant_candidates_split_evenly(self):
        creators = np.array([[0.3], [-0.3]])
        rng = np.random.default_rng(1)
        draws = np.array([
            rec.sample_choice(np.array([0.0]), [0, 1], creators, 0.5, rng)
            for _ in range(100_000)
        ])
        assert abs((draws == 0).mean() - 0.5) < 0.01

    def test_softmax_ratio_two_to_one(self):
        # distances 0 and 0.3466 at temperature 0.5: weights 1 and ~1/2
        creators = np.array([[0.0], [0.3466]])
        rng = np.random.default_rng(2)
        draws = np.array([
            rec.sample_choice(np.array([0.0]), [0, 1], creators, 0.5, rng)
            for _ in range(100_000)
        ])
        assert abs((draws == 0).mean() - 2 / 3) < 0.01

    def test_zero_temperature_limit_is_argmin(self):
        creators = np.array([[0.21], [0.2], [0.5]])
        rng = np.random.default_rng(3)
        picks = {
            rec.sample_choice(np.array([0.0]), [0, 1, 2], creators, 1e-6, rng)
            for _ in range(100_000)
        }
        assert picks == {1}

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(4)
        creators = rng.uniform(-1, 1, (6, 2))
        probs = rec.choice_probabilities(np.zeros(2), np.arange(6), creators, 0.5)
        assert probs.sum() == pytest.approx(1.0)
        assert (probs > 0).all()

    def test_empty_candidates_raise(self):
        with pytest.raises(ValueError):
            rec.sample_choice(np.zeros(1), [], np.zeros((2, 1)), 0.5, np.random.default_rng(0))


class TestGreedyOptimality:
    def test_greedy_choice_minimizes_distance_on_same_state(self):
        # greedy d=0, k=1 must never be beaten by any other strategy per step
        rng = np.random.default_rng(7)
        creators = rng.uniform(-1, 1, (10, 2))
        for _ in range(50):
            u = rng.uniform(-1, 1, 2)
            greedy = rec.topk_candidates(u, creators, 1)[0]
            best = np.linalg.norm(creators[greedy] - u)
            for k in (1, 3, 5, 10):
                cands = rec.topk_candidates(rng.uniform(-1, 1, 2), creators, k)
                choice = rec.sample_choice(u, cands, creators, 0.5, rng)
                assert best <= np.linalg.norm(creators[choice] - u) + 1e-12


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            RecommenderConfig(d=-1)
        with pytest.raises(ValueError):
            RecommenderConfig(k=0)
        with pytest.raises(ValueError):
            RecommenderConfig(temperature=0.0)
        with pytest.raises(ValueError):
            RecommenderConfig(score_basis="nearest")

    def test_strategy_name(self):
        assert RecommenderConfig(d=0).strategy == "greedy"
        assert RecommenderConfig(d=3).strategy == "d_hop"
