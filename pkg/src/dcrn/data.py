"""Dataset directory I/O, embedding dumps, and the stochastic block model
generator used for synthetic benchmarks.

A dataset directory holds features.tsv, edges.tsv, labels.tsv, and a
manifest.json naming the files and their expected counts.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, ManifestError, ParseError
from .graph import Graph, canonical_edges
from .validation import as_matrix

logger = logging.getLogger(__name__)

FLOAT_FMT = "{:.17g}"


@dataclass
class DatasetManifest:
    name: str
    n_nodes: int
    n_edges: int
    feature_dim: int
    n_classes: int
    features_path: Path
    edges_path: Path
    labels_path: Path

    @classmethod
    def from_json(cls, path) -> "DatasetManifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ManifestError(f"manifest {path} does not exist") from None
        except json.JSONDecodeError as exc:
            raise ManifestError(f"manifest {path} is not valid JSON: {exc}") from None
        required = {"name", "n_nodes", "n_edges", "feature_dim", "n_classes",
                    "features", "edges", "labels"}
        missing = required - set(doc)
        if missing:
            raise ManifestError(f"manifest {path} is missing keys {sorted(missing)}")
        base = path.parent
        return cls(
            name=str(doc["name"]),
            n_nodes=int(doc["n_nodes"]),
            n_edges=int(doc["n_edges"]),
            feature_dim=int(doc["feature_dim"]),
            n_classes=int(doc["n_classes"]),
            features_path=base / doc["features"],
            edges_path=base / doc["edges"],
            labels_path=base / doc["labels"],
        )


def _read_rows(path, n_fields, convert, what):
    rows = []
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise ManifestError(f"{what} file {path} does not exist") from None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if n_fields is not None and len(fields) != n_fields:
            raise ParseError(path, lineno,
                             f"expected {n_fields} fields, got {len(fields)}")
        try:
            rows.append([convert(f) for f in fields])
        except ValueError as exc:
            raise ParseError(path, lineno, f"bad {what} value: {exc}") from None
    return rows


def load_graph(manifest: DatasetManifest) -> Graph:
    """Load and validate a dataset directory against its manifest.

    Duplicate edges and self-loops are dropped with a logged warning count.
    """
    feature_rows = _read_rows(manifest.features_path, None, float, "feature")
    if len(feature_rows) != manifest.n_nodes:
        raise ManifestError(
            f"{manifest.features_path} has {len(feature_rows)} rows, "
            f"manifest says {manifest.n_nodes}"
        )
    widths = {len(r) for r in feature_rows}
    if len(widths) > 1:
        raise ParseError(manifest.features_path, 1,
                         f"inconsistent field counts {sorted(widths)}")
    if widths and widths != {manifest.feature_dim}:
        raise ManifestError(
            f"{manifest.features_path} has {widths.pop()} columns, "
            f"manifest says {manifest.feature_dim}"
        )
    features = np.asarray(feature_rows, dtype=np.float64)

    edge_rows = _read_rows(manifest.edges_path, 2, int, "edge")
    for u, v in edge_rows:
        if not (0 <= u < manifest.n_nodes and 0 <= v < manifest.n_nodes):
            raise ManifestError(
                f"{manifest.edges_path}: edge ({u}, {v}) out of range for "
                f"{manifest.n_nodes} nodes"
            )
    edges, self_loops, duplicates = canonical_edges(edge_rows)
    if self_loops or duplicates:
        logger.warning(
            "%s: dropped %d self-loops and %d duplicate edges",
            manifest.edges_path, self_loops, duplicates,
        )
    if len(edges) != manifest.n_edges:
        raise ManifestError(
            f"{manifest.edges_path} has {len(edges)} unique edges, "
            f"manifest says {manifest.n_edges}"
        )

    label_rows = _read_rows(manifest.labels_path, 1, int, "label")
    if len(label_rows) != manifest.n_nodes:
        raise ManifestError(
            f"{manifest.labels_path} has {len(label_rows)} rows, "
            f"manifest says {manifest.n_nodes}"
        )
    labels = np.asarray([r[0] for r in label_rows], dtype=np.int64)
    if labels.min() < 0:
        raise ManifestError(f"{manifest.labels_path} has negative labels")
    if int(labels.max()) + 1 != manifest.n_classes:
        raise ManifestError(
            f"{manifest.labels_path} spans {int(labels.max()) + 1} classes, "
            f"manifest says {manifest.n_classes}"
        )
    return Graph(n_nodes=manifest.n_nodes, edges=edges,
                 attributes=features, labels=labels)


def _write_matrix(arr, path):
    with open(path, "w") as fh:
        for row in arr:
            fh.write("\t".join(FLOAT_FMT.format(v) for v in row))
            fh.write("\n")


def save_graph(g: Graph, out_dir, name: str = "dataset") -> Path:
    """Write a graph as a dataset directory; returns the manifest path."""
    if g.labels is None:
        raise ContractError("save_graph requires a labeled graph")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_matrix(g.attributes, out_dir / "features.tsv")
    with open(out_dir / "edges.tsv", "w") as fh:
        for u, v in g.edges:
            fh.write(f"{u}\t{v}\n")
    with open(out_dir / "labels.tsv", "w") as fh:
        for label in g.labels:
            fh.write(f"{label}\n")
    manifest = {
        "name": name,
        "n_nodes": g.n_nodes,
        "n_edges": g.n_edges,
        "feature_dim": g.feature_dim,
        "n_classes": g.n_classes,
        "features": "features.tsv",
        "edges": "edges.tsv",
        "labels": "labels.tsv",
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest_path


@dataclass
class SbmSpec:
    """Stochastic block model with Gaussian features around per-block centers."""

    n_clusters: int
    nodes_per_cluster: int
    p_in: float
    p_out: float
    feature_dim: int
    center_separation: float
    feature_noise_std: float
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1 or self.nodes_per_cluster < 1:
            raise ContractError("n_clusters and nodes_per_cluster must be positive")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ContractError(f"{name} must be in [0, 1], got {p}")
        if self.feature_dim < 1:
            raise ContractError(f"feature_dim must be positive, got {self.feature_dim}")
        if self.feature_noise_std < 0:
            raise ContractError(
                f"feature_noise_std must be non-negative, got {self.feature_noise_std}"
            )


def generate_sbm(spec: SbmSpec) -> Graph:
    """Sample a block-model graph with cluster-separated Gaussian features.

    Block k's feature center is center_separation times the (k mod D)-th
    basis direction. Edge draws precede feature draws for a fixed seed
    budget; both come from one generator seeded by spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_clusters * spec.nodes_per_cluster
    labels = np.repeat(np.arange(spec.n_clusters), spec.nodes_per_cluster)

    same = labels[:, None] == labels[None, :]
    prob = np.where(same, spec.p_in, spec.p_out)
    draws = rng.random((n, n))
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    present = upper & (draws < prob)
    us, vs = np.nonzero(present)
    edges = list(zip(us.tolist(), vs.tolist()))

    centers = np.zeros((spec.n_clusters, spec.feature_dim))
    for k in range(spec.n_clusters):
        centers[k, k % spec.feature_dim] = spec.center_separation
    features = centers[labels] + rng.normal(0.0, spec.feature_noise_std,
                                            size=(n, spec.feature_dim))
    return Graph(n_nodes=n, edges=edges, attributes=features, labels=labels)


def dump_embedding(z, path) -> None:
    """Write an embedding matrix as TSV with 17 significant digits."""
    _write_matrix(as_matrix(z, "z"), path)


def load_embedding(path) -> np.ndarray:
    """Read an embedding written by :func:`dump_embedding`."""
    rows = _read_rows(path, None, float, "embedding")
    return np.asarray(rows, dtype=np.float64)
