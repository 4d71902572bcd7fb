"""Dataset directory round trips, manifest validation, SBM generation."""
import json

import numpy as np
import pytest

from dcrn.data import (
    DatasetManifest,
    SbmSpec,
    dump_embedding,
    generate_sbm,
    load_embedding,
    load_graph,
    save_graph,
)
from dcrn.errors import ContractError, ManifestError, ParseError
from dcrn.graph import Graph


def small_graph(seed=0):
    rng = np.random.default_rng(seed)
    return Graph(5, [(0, 1), (0, 2), (1, 2), (3, 4)],
                 rng.normal(size=(5, 3)), labels=[0, 0, 0, 1, 1])


class TestRoundTrip:
    def test_bit_exact(self, tmp_path):
        g = small_graph()
        manifest_path = save_graph(g, tmp_path / "ds", name="toy")
        loaded = load_graph(DatasetManifest.from_json(manifest_path))
        assert loaded.n_nodes == g.n_nodes
        assert loaded.edges == g.edges
        assert np.array_equal(loaded.attributes, g.attributes)
        assert np.array_equal(loaded.labels, g.labels)

    def test_extreme_values_survive(self, tmp_path):
        attrs = np.array([[1e-300, -1e300], [np.pi, 1.0 / 3.0], [0.0, -0.0]])
        g = Graph(3, [(0, 1)], attrs, labels=[0, 0, 0])
        manifest_path = save_graph(g, tmp_path / "ds")
        loaded = load_graph(DatasetManifest.from_json(manifest_path))
        assert np.array_equal(loaded.attributes, attrs)

    def test_manifest_content(self, tmp_path):
        manifest_path = save_graph(small_graph(), tmp_path / "ds", name="toy")
        doc = json.loads(manifest_path.read_text())
        assert doc["name"] == "toy"
        assert doc["n_nodes"] == 5 and doc["n_edges"] == 4
        assert doc["feature_dim"] == 3 and doc["n_classes"] == 2

    def test_save_requires_labels(self, tmp_path):
        g = Graph(2, [(0, 1)], np.ones((2, 1)))
        with pytest.raises(ContractError):
            save_graph(g, tmp_path / "ds")

    def test_embedding_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        z = rng.normal(size=(7, 4))
        path = tmp_path / "z.tsv"
        dump_embedding(z, path)
        assert np.array_equal(load_embedding(path), z)

    def test_embedding_dump_deterministic(self, tmp_path):
        z = np.random.default_rng(2).normal(size=(3, 3))
        a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
        dump_embedding(z, a)
        dump_embedding(z, b)
        assert a.read_bytes() == b.read_bytes()


class TestManifestValidation:
    @pytest.fixture
    def dataset(self, tmp_path):
        save_graph(small_graph(), tmp_path / "ds")
        return tmp_path / "ds"

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ManifestError):
            DatasetManifest.from_json(tmp_path / "nope.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(ManifestError):
            DatasetManifest.from_json(path)

    def test_missing_keys(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"name": "x"}))
        with pytest.raises(ManifestError, match="missing keys"):
            DatasetManifest.from_json(path)

    def _patch(self, dataset, **changes):
        path = dataset / "manifest.json"
        doc = json.loads(path.read_text())
        doc.update(changes)
        path.write_text(json.dumps(doc))
        return DatasetManifest.from_json(path)

    def test_node_count_mismatch(self, dataset):
        with pytest.raises(ManifestError, match="rows"):
            load_graph(self._patch(dataset, n_nodes=6))

    def test_edge_count_mismatch(self, dataset):
        with pytest.raises(ManifestError, match="edges"):
            load_graph(self._patch(dataset, n_edges=9))

    def test_feature_dim_mismatch(self, dataset):
        with pytest.raises(ManifestError, match="columns"):
            load_graph(self._patch(dataset, feature_dim=4))

    def test_class_count_mismatch(self, dataset):
        with pytest.raises(ManifestError, match="classes"):
            load_graph(self._patch(dataset, n_classes=3))

    def test_missing_feature_file(self, dataset):
        (dataset / "features.tsv").unlink()
        with pytest.raises(ManifestError, match="does not exist"):
            load_graph(DatasetManifest.from_json(dataset / "manifest.json"))

    def test_edge_out_of_range(self, dataset):
        (dataset / "edges.tsv").write_text("0\t9\n" * 4)
        with pytest.raises(ManifestError, match="out of range"):
            load_graph(DatasetManifest.from_json(dataset / "manifest.json"))


class TestParseErrors:
    def test_bad_float_names_location(self, tmp_path):
        save_graph(small_graph(), tmp_path / "ds")
        features = tmp_path / "ds" / "features.tsv"
        lines = features.read_text().splitlines()
        lines[2] = lines[2].replace(lines[2].split("\t")[0], "abc", 1)
        features.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError) as info:
            load_graph(DatasetManifest.from_json(tmp_path / "ds" / "manifest.json"))
        assert info.value.line == 3
        assert "features.tsv" in str(info.value)

    def test_wrong_edge_arity(self, tmp_path):
        save_graph(small_graph(), tmp_path / "ds")
        (tmp_path / "ds" / "edges.tsv").write_text("0\t1\t2\n")
        with pytest.raises(ParseError):
            load_graph(DatasetManifest.from_json(tmp_path / "ds" / "manifest.json"))

    def test_ragged_features(self, tmp_path):
        save_graph(small_graph(), tmp_path / "ds")
        features = tmp_path / "ds" / "features.tsv"
        lines = features.read_text().splitlines()
        lines[0] += "\t1.0"
        features.write_text("\n".join(lines) + "\n")
        with pytest.raises(ParseError, match="inconsistent"):
            load_graph(DatasetManifest.from_json(tmp_path / "ds" / "manifest.json"))

    def test_duplicate_edges_logged_and_dropped(self, tmp_path, caplog):
        save_graph(small_graph(), tmp_path / "ds")
        edges = tmp_path / "ds" / "edges.tsv"
        edges.write_text(edges.read_text() + "1\t0\n2\t2\n")
        with caplog.at_level("WARNING", logger="dcrn.data"):
            g = load_graph(DatasetManifest.from_json(tmp_path / "ds" / "manifest.json"))
        assert g.n_edges == 4
        assert "dropped 1 self-loops and 1 duplicate edges" in caplog.text


class TestSbm:
    def test_within_block_probability_one(self):
        spec = SbmSpec(n_clusters=2, nodes_per_cluster=4, p_in=1.0, p_out=0.0,
                       feature_dim=2, center_separation=1.0, feature_noise_std=0.1)
        g = generate_sbm(spec)
        # two complete blocks of 4: 2 * C(4, 2) edges, none across
        assert g.n_edges == 12
        for u, v in g.edges:
            assert g.labels[u] == g.labels[v]

    def test_zero_probabilities_give_empty_graph(self):
        spec = SbmSpec(n_clusters=3, nodes_per_cluster=3, p_in=0.0, p_out=0.0,
                       feature_dim=2, center_separation=1.0, feature_noise_std=0.1)
        assert generate_sbm(spec).n_edges == 0

    def test_noiseless_features_sit_on_centers(self):
        spec = SbmSpec(n_clusters=3, nodes_per_cluster=2, p_in=1.0, p_out=0.0,
                       feature_dim=2, center_separation=2.5, feature_noise_std=0.0)
        g = generate_sbm(spec)
        # block k centers on 2.5 * e_{k mod 2}
        assert np.array_equal(g.attributes[0], [2.5, 0.0])
        assert np.array_equal(g.attributes[2], [0.0, 2.5])
        assert np.array_equal(g.attributes[4], [2.5, 0.0])
        assert np.array_equal(g.attributes[0], g.attributes[1])

    def test_labels_are_contiguous_blocks(self):
        spec = SbmSpec(n_clusters=3, nodes_per_cluster=5, p_in=0.5, p_out=0.1,
                       feature_dim=4, center_separation=1.0, feature_noise_std=0.5)
        g = generate_sbm(spec)
        assert np.array_equal(g.labels, np.repeat([0, 1, 2], 5))

    def test_seed_reproducibility(self):
        spec = SbmSpec(n_clusters=2, nodes_per_cluster=10, p_in=0.4, p_out=0.05,
                       feature_dim=3, center_separation=1.0, feature_noise_std=0.3,
                       seed=11)
        a, b = generate_sbm(spec), generate_sbm(spec)
        assert a.edges == b.edges
        assert np.array_equal(a.attributes, b.attributes)

    def test_edge_rate_monte_carlo(self):
        # average within-block edge count over seeds tracks p_in within 5%
        counts = []
        for seed in range(200):
            spec = SbmSpec(n_clusters=2, nodes_per_cluster=8, p_in=0.3, p_out=0.0,
                           feature_dim=2, center_separation=1.0,
                           feature_noise_std=0.1, seed=seed)
            counts.append(generate_sbm(spec).n_edges)
        expected = 2 * (8 * 7 / 2) * 0.3  # 16.8 edges per draw
        assert abs(np.mean(counts) - expected) <= 0.05 * expected

    @pytest.mark.parametrize("kwargs", [
        {"p_in": 1.5},
        {"p_out": -0.1},
        {"n_clusters": 0},
        {"feature_dim": 0},
        {"feature_noise_std": -1.0},
    ])
    def test_invalid_spec_rejected(self, kwargs):
        base = dict(n_clusters=2, nodes_per_cluster=3, p_in=0.5, p_out=0.1,
                    feature_dim=2, center_separation=1.0, feature_noise_std=0.1)
        base.update(kwargs)
        with pytest.raises(ContractError):
            SbmSpec(**base)
