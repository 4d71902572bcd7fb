"""Graph container, normalizations, edge masking, and PPR diffusion."""
import numpy as np
import pytest

from dcrn.errors import ContractError, DegenerateRowError
from dcrn.graph import (
    DistortionConfig,
    Graph,
    adjacency_matrix,
    canonical_edges,
    corrupt_features,
    edge_similarities,
    make_views,
    mask_edges,
    ppr_diffusion,
    random_walk_normalize,
    symmetric_normalize,
)


def path_graph(n, dim=2, seed=0):
    rng = np.random.default_rng(seed)
    return Graph(n, [(i, i + 1) for i in range(n - 1)], rng.normal(size=(n, dim)))


def random_graph(rng, n_max=10, dim=3):
    n = int(rng.integers(2, n_max + 1))
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.5]
    if not edges:
        edges = [(0, 1)]
    return Graph(n, edges, rng.normal(size=(n, dim)))


class TestGraphContainer:
    def test_properties(self):
        g = Graph(3, [(0, 1), (1, 2)], np.ones((3, 4)), labels=[0, 1, 1])
        assert g.n_edges == 2
        assert g.feature_dim == 4
        assert g.n_classes == 2

    def test_self_loop_rejected(self):
        with pytest.raises(ContractError):
            Graph(2, [(1, 1)], np.ones((2, 1)))

    def test_duplicate_edge_rejected(self):
        with pytest.raises(ContractError):
            Graph(3, [(0, 1), (0, 1)], np.ones((3, 1)))

    def test_reversed_edge_rejected(self):
        with pytest.raises(ContractError):
            Graph(3, [(2, 1)], np.ones((3, 1)))

    def test_out_of_range_edge_rejected(self):
        with pytest.raises(ContractError):
            Graph(2, [(0, 5)], np.ones((2, 1)))

    def test_attribute_row_count_checked(self):
        with pytest.raises(ContractError):
            Graph(3, [(0, 1)], np.ones((2, 1)))

    def test_label_shape_checked(self):
        with pytest.raises(ContractError):
            Graph(3, [(0, 1)], np.ones((3, 1)), labels=[0, 1])

    def test_canonical_edges_dedups(self):
        edges, loops, dups = canonical_edges([(1, 0), (0, 1), (2, 2), (0, 2)])
        assert edges == [(0, 1), (0, 2)]
        assert loops == 1
        assert dups == 1


class TestDistortionConfig:
    def test_defaults(self):
        cfg = DistortionConfig()
        assert cfg.noise_mean == 1.0 and cfg.noise_std == 0.1
        assert cfg.mask_fraction == 0.10 and cfg.teleport_alpha == 0.2

    @pytest.mark.parametrize("kwargs", [
        {"mask_fraction": 1.0},
        {"mask_fraction": -0.1},
        {"teleport_alpha": 0.0},
        {"teleport_alpha": 1.0},
        {"noise_std": -1.0},
    ])
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ContractError):
            DistortionConfig(**kwargs)


class TestNormalization:
    def test_adjacency_single_edge(self):
        g = Graph(2, [(0, 1)], np.ones((2, 1)))
        assert np.array_equal(adjacency_matrix(g), [[0.0, 1.0], [1.0, 0.0]])

    def test_adjacency_edgeless(self):
        g = Graph(3, [], np.ones((3, 1)))
        assert np.array_equal(adjacency_matrix(g), np.zeros((3, 3)))

    def test_random_walk_two_nodes(self):
        g = Graph(2, [(0, 1)], np.ones((2, 1)))
        assert np.allclose(random_walk_normalize(g), [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_random_walk_edgeless_is_identity(self):
        g = Graph(4, [], np.ones((4, 1)))
        assert np.array_equal(random_walk_normalize(g), np.eye(4))

    def test_random_walk_rows_sum_to_one(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            g = random_graph(rng)
            sums = random_walk_normalize(g).sum(axis=1)
            assert np.abs(sums - 1.0).max() <= 1e-12

    def test_symmetric_single_node(self):
        assert np.array_equal(symmetric_normalize(np.zeros((1, 1))), [[1.0]])

    def test_symmetric_two_nodes(self):
        out = symmetric_normalize(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_symmetric_triangle(self):
        a = np.ones((3, 3)) - np.eye(3)
        assert np.allclose(symmetric_normalize(a), np.full((3, 3), 1.0 / 3.0), atol=1e-15)

    def test_symmetric_edgeless_is_identity(self):
        assert np.array_equal(symmetric_normalize(np.zeros((5, 5))), np.eye(5))

    def test_symmetric_output_is_symmetric(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            g = random_graph(rng)
            out = symmetric_normalize(adjacency_matrix(g))
            assert np.abs(out - out.T).max() <= 1e-15
            assert out.min() >= 0.0

    def test_symmetric_rejects_asymmetric(self):
        with pytest.raises(ContractError):
            symmetric_normalize(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_symmetric_rejects_negative(self):
        with pytest.raises(ContractError):
            symmetric_normalize(np.array([[0.0, -1.0], [-1.0, 0.0]]))

    def test_symmetric_rejects_nonzero_diagonal(self):
        with pytest.raises(ContractError):
            symmetric_normalize(np.eye(2))


class TestCorruptFeatures:
    def test_zero_std_scales_exactly(self):
        x = np.arange(6.0).reshape(2, 3)
        cfg = DistortionConfig(noise_mean=2.0, noise_std=0.0)
        out = corrupt_features(x, cfg, np.random.default_rng(0))
        assert np.array_equal(out, 2.0 * x)

    def test_zero_attributes_stay_zero(self):
        out = corrupt_features(np.zeros((4, 4)), DistortionConfig(), np.random.default_rng(0))
        assert np.array_equal(out, np.zeros((4, 4)))

    def test_noise_mean_monte_carlo(self):
        x = np.ones((100000, 1))
        out = corrupt_features(x, DistortionConfig(), np.random.default_rng(5))
        assert abs(out.mean() - 1.0) <= 0.01

    def test_deterministic_given_seed(self):
        x = np.ones((10, 3))
        a = corrupt_features(x, DistortionConfig(), np.random.default_rng(42))
        b = corrupt_features(x, DistortionConfig(), np.random.default_rng(42))
        assert np.array_equal(a, b)


class TestEdgeMasking:
    def test_similarities_hand_values(self):
        g = Graph(3, [(0, 1), (1, 2)], np.ones((3, 1)))
        latent = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        assert np.allclose(edge_similarities(g, latent), [1.0, 0.0], atol=1e-12)

    def test_zero_latent_row_rejected(self):
        g = Graph(2, [(0, 1)], np.ones((2, 1)))
        with pytest.raises(DegenerateRowError):
            edge_similarities(g, np.array([[0.0, 0.0], [1.0, 1.0]]))

    def test_least_similar_edge_dropped(self):
        g = Graph(3, [(0, 1), (1, 2)], np.ones((3, 1)))
        latent = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        cfg = DistortionConfig(mask_fraction=0.5)
        got = mask_edges(g, latent, cfg)
        expected = symmetric_normalize(adjacency_matrix(Graph(3, [(0, 1)], np.ones((3, 1)))))
        assert np.array_equal(got, expected)

    def test_zero_fraction_keeps_everything(self):
        rng = np.random.default_rng(12)
        g = random_graph(rng)
        got = mask_edges(g, rng.normal(size=(g.n_nodes, 3)), DistortionConfig(mask_fraction=0.0))
        assert np.array_equal(got, symmetric_normalize(adjacency_matrix(g)))

    def test_drop_count_uses_floor(self):
        # 7 edges at fraction 0.25 -> floor(1.75) = 1 dropped
        n = 5
        edges = [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2), (1, 3), (1, 4)]
        rng = np.random.default_rng(13)
        g = Graph(n, edges, rng.normal(size=(n, 2)))
        latent = rng.normal(size=(n, 4))
        sims = edge_similarities(g, latent)
        drop = int(np.argmin(sims))
        kept = [e for i, e in enumerate(edges) if i != drop]
        got = mask_edges(g, latent, DistortionConfig(mask_fraction=0.25))
        expected = symmetric_normalize(
            adjacency_matrix(Graph(n, kept, np.ones((n, 1)))))
        assert np.array_equal(got, expected)

    def test_ties_drop_lowest_edge_index_first(self):
        # identical latent rows -> every similarity is 1.0, so the first
        # floor(0.5 * 4) = 2 edges go
        n = 4
        edges = [(0, 1), (0, 2), (1, 3), (2, 3)]
        g = Graph(n, edges, np.ones((n, 1)))
        latent = np.ones((n, 3))
        got = mask_edges(g, latent, DistortionConfig(mask_fraction=0.5))
        expected = symmetric_normalize(
            adjacency_matrix(Graph(n, edges[2:], np.ones((n, 1)))))
        assert np.array_equal(got, expected)


class TestDiffusion:
    def test_two_node_closed_form(self):
        g = Graph(2, [(0, 1)], np.ones((2, 1)))
        out = ppr_diffusion(g, DistortionConfig(teleport_alpha=0.2))
        assert np.abs(out - [[0.6, 0.4], [0.4, 0.6]]).max() <= 1e-9

    def test_single_node(self):
        g = Graph(1, [], np.ones((1, 1)))
        assert np.allclose(ppr_diffusion(g, DistortionConfig()), [[1.0]], atol=1e-12)

    def test_edgeless_is_identity(self):
        g = Graph(4, [], np.ones((4, 1)))
        assert np.allclose(ppr_diffusion(g, DistortionConfig()), np.eye(4), atol=1e-12)

    def test_matches_truncated_neumann_series(self):
        rng = np.random.default_rng(14)
        for _ in range(30):
            g = random_graph(rng, n_max=10)
            alpha = float(rng.uniform(0.1, 0.5))
            cfg = DistortionConfig(teleport_alpha=alpha)
            a_sym = symmetric_normalize(adjacency_matrix(g))
            term = np.eye(g.n_nodes)
            acc = term.copy()
            for _ in range(1, 200):
                term = (1.0 - alpha) * (term @ a_sym)
                acc += term
            oracle = alpha * acc
            assert np.abs(ppr_diffusion(g, cfg) - oracle).max() <= 1e-6

    def test_symmetric_and_nonnegative(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            g = random_graph(rng)
            out = ppr_diffusion(g, DistortionConfig())
            assert np.array_equal(out, out.T)
            assert out.min() >= 0.0


class TestMakeViews:
    def test_views_share_corrupted_attributes(self):
        rng = np.random.default_rng(16)
        g = random_graph(rng)
        latent = rng.normal(size=(g.n_nodes, 3))
        (x1, a1), (x2, a2) = make_views(g, latent, DistortionConfig(), rng)
        assert x1 is x2
        assert a1.shape == a2.shape == (g.n_nodes, g.n_nodes)
        assert not np.array_equal(a1, a2)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(17)
        g = random_graph(rng)
        latent = rng.normal(size=(g.n_nodes, 3))
        (xa, aa), (xd, ad_) = make_views(g, latent, DistortionConfig(), np.random.default_rng(3))
        (xb, ab), (xe, ae) = make_views(g, latent, DistortionConfig(), np.random.default_rng(3))
        assert np.array_equal(xa, xb)
        assert np.array_equal(aa, ab)
        assert np.array_equal(ad_, ae)
