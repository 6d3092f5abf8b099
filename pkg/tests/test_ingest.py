import numpy as np
import pytest

from socialrec import ingest
from socialrec.graph import SocialGraph
from socialrec.ingest import (
    CommunityAssignment,
    IngestError,
    bottom_eigenpairs,
    init_opinions_from_communities,
    laplacian_residuals,
    load_edge_list,
    sample_community_centers,
    spectral_communities,
)


def write_edges(tmp_path, text, name="edges.txt"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def clique_pair_graph(size=10):
    """Two disjoint cliques on 2 * size nodes."""
    edges = []
    for base in (0, size):
        for a in range(size):
            for b in range(size):
                if a != b:
                    edges.append((base + a, base + b, 0.0))
    n = 2 * size
    return SocialGraph.from_arrays(
        n, [e[0] for e in edges], [e[1] for e in edges],
        np.zeros(len(edges)), np.ones(n),
    )


class TestLoadEdgeList:
    def test_single_line_makes_both_directions(self, tmp_path):
        graph, id_map = load_edge_list(write_edges(tmp_path, "0 1\n"))
        assert graph.n_users == 2
        assert graph.n_edges == 2
        assert id_map == {0: 0, 1: 1}

    def test_duplicates_collapse(self, tmp_path):
        graph, _ = load_edge_list(write_edges(tmp_path, "0 1\n0 1\n1 0\n"))
        assert graph.n_edges == 2

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        graph, _ = load_edge_list(write_edges(tmp_path, "# header\n\n3 7\n"))
        assert graph.n_users == 2

    def test_ids_remap_dense_and_sorted(self, tmp_path):
        graph, id_map = load_edge_list(write_edges(tmp_path, "42 7\n7 100\n"))
        assert id_map == {7: 0, 42: 1, 100: 2}
        assert graph.n_users == 3

    def test_symmetric_edge_set(self, tmp_path):
        graph, _ = load_edge_list(write_edges(tmp_path, "0 1\n1 2\n4 2\n"))
        forward = set(zip(graph.edge_src.tolist(), graph.edge_dst.tolist()))
        assert all((b, a) in forward for a, b in forward)

    def test_malformed_line_raises(self, tmp_path):
        with pytest.raises(IngestError):
            load_edge_list(write_edges(tmp_path, "0 x\n"))
        with pytest.raises(IngestError):
            load_edge_list(write_edges(tmp_path, "0 1 2\n"))

    def test_empty_file_raises(self, tmp_path):
        with pytest.raises(IngestError):
            load_edge_list(write_edges(tmp_path, "# nothing\n"))


class TestSpectralCommunities:
    def test_two_cliques_recovered_exactly(self):
        graph = clique_pair_graph(10)
        assignment = spectral_communities(graph, 2, seed=0)
        first, second = assignment.labels[:10], assignment.labels[10:]
        assert len(set(first)) == 1 and len(set(second)) == 1
        assert first[0] != second[0]

    def test_k_one_trivial(self):
        graph = clique_pair_graph(4)
        assignment = spectral_communities(graph, 1, seed=0)
        assert set(assignment.labels) == {0}

    def test_k_above_n_rejected(self):
        graph = clique_pair_graph(3)
        with pytest.raises(IngestError):
            spectral_communities(graph, 10, seed=0)

    def test_eigen_residual_bound(self):
        graph = clique_pair_graph(8)
        vals, vecs = bottom_eigenpairs(graph, 3, seed=0)
        res = laplacian_residuals(graph, vals, vecs)
        assert (res <= 1e-4).all()

    def test_disconnected_components_give_zero_eigenvalues(self):
        graph = clique_pair_graph(6)
        vals, _ = bottom_eigenpairs(graph, 2, seed=0)
        assert np.abs(vals).max() < 1e-8

    def test_relabeling_preserves_communities(self):
        size = 8
        base = clique_pair_graph(size)
        labels_base = spectral_communities(base, 2, seed=0).labels

        # rebuild with node IDs reversed; communities must match up to rename
        n = 2 * size
        perm = np.arange(n)[::-1]
        src = perm[base.edge_src]
        dst = perm[base.edge_dst]
        relabeled = SocialGraph.from_arrays(n, src, dst, np.zeros(src.size), np.ones(n))
        labels_perm = spectral_communities(relabeled, 2, seed=0).labels

        moved = labels_perm[perm]
        agree = (moved == labels_base).mean()
        assert agree in (0.0, 1.0)  # identical or globally swapped names

    def test_three_blobs_on_a_ring_of_cliques(self):
        # cliques weakly chained by single links still split into 3 blocks
        size, k = 6, 3
        edges = []
        for c in range(k):
            base = c * size
            for a in range(size):
                for b in range(size):
                    if a != b:
                        edges.append((base + a, base + b))
        for c in range(k - 1):
            a, b = c * size, (c + 1) * size
            edges += [(a, b), (b, a)]
        n = k * size
        graph = SocialGraph.from_arrays(
            n, [e[0] for e in edges], [e[1] for e in edges],
            np.zeros(len(edges)), np.ones(n),
        )
        labels = spectral_communities(graph, k, seed=1).labels
        for c in range(k):
            block = labels[c * size:(c + 1) * size]
            assert len(set(block)) == 1
        assert len(set(labels)) == k


class TestCommunityOpinions:
    def test_zero_noise_hits_centers(self):
        assignment = CommunityAssignment(
            labels=np.array([0, 1, 1, 0]),
            centers=np.array([[0.2, 0.3, 0.4], [0.7, 0.8, 0.9]]),
        )
        opinions = init_opinions_from_communities(
            assignment, np.random.default_rng(0), sigma=0.0
        )
        assert np.allclose(opinions, assignment.centers[assignment.labels])

    def test_noise_mean_recovers_center(self):
        assignment = CommunityAssignment(
            labels=np.zeros(10_000, dtype=int),
            centers=np.array([[0.5, 0.5, 0.5]]),
        )
        opinions = init_opinions_from_communities(
            assignment, np.random.default_rng(1), sigma=0.15
        )
        assert np.abs(opinions.mean(axis=0) - 0.5).max() < 0.01

    def test_clamped_to_box(self):
        assignment = CommunityAssignment(
            labels=np.zeros(5000, dtype=int),
            centers=np.array([[0.99, 0.99, 0.99]]),
        )
        opinions = init_opinions_from_communities(
            assignment, np.random.default_rng(2), sigma=0.5
        )
        assert np.abs(opinions).max() <= 1.0

    def test_missing_centers_rejected(self):
        assignment = CommunityAssignment(labels=np.zeros(3, dtype=int))
        with pytest.raises(IngestError):
            init_opinions_from_communities(assignment, np.random.default_rng(0))

    def test_center_sampler_in_unit_box(self):
        centers = sample_community_centers(34, 3, np.random.default_rng(3))
        assert centers.shape == (34, 3)
        assert (centers >= 0.0).all() and (centers <= 1.0).all()
