"""Graph container, adjacency normalizations, and the two-view distortion ops.

The two distorted views share one noise-corrupted attribute matrix and differ
in structure: view one drops the least-similar edges and renormalizes, view
two replaces the adjacency with its personalized-PageRank diffusion.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DegenerateRowError, DomainError
from .validation import as_matrix, check_symmetric


@dataclass
class DistortionConfig:
    """Knobs for the two graph distortions."""

    noise_mean: float = 1.0
    noise_std: float = 0.1
    mask_fraction: float = 0.10
    teleport_alpha: float = 0.2
    freeze_noise: bool = False

    def __post_init__(self):
        if not 0.0 <= self.mask_fraction < 1.0:
            raise ContractError(f"mask_fraction must be in [0, 1), got {self.mask_fraction}")
        if not 0.0 < self.teleport_alpha < 1.0:
            raise ContractError(f"teleport_alpha must be in (0, 1), got {self.teleport_alpha}")
        if self.noise_std < 0.0:
            raise ContractError(f"noise_std must be non-negative, got {self.noise_std}")


@dataclass
class Graph:
    """Undirected attributed graph. Edges are canonical (u < v), no repeats."""

    n_nodes: int
    edges: list[tuple[int, int]]
    attributes: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.n_nodes <= 0:
            raise ContractError(f"n_nodes must be positive, got {self.n_nodes}")
        self.edges = [(int(u), int(v)) for u, v in self.edges]
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise ContractError(f"self-loop ({u}, {v}) is not allowed")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise ContractError(f"edge ({u}, {v}) out of range for {self.n_nodes} nodes")
            if u > v:
                raise ContractError(f"edge ({u}, {v}) must be stored as (min, max)")
            if (u, v) in seen:
                raise ContractError(f"duplicate edge ({u}, {v})")
            seen.add((u, v))
        self.attributes = as_matrix(self.attributes, "attributes")
        if self.attributes.shape[0] != self.n_nodes:
            raise ContractError(
                f"attributes have {self.attributes.shape[0]} rows for {self.n_nodes} nodes"
            )
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.n_nodes,):
                raise ContractError(
                    f"labels must have shape ({self.n_nodes},), got {self.labels.shape}"
                )
            if self.labels.min() < 0:
                raise ContractError("labels must be non-negative")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.attributes.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            raise ContractError("graph has no labels")
        return int(self.labels.max()) + 1


def canonical_edges(pairs) -> tuple[list[tuple[int, int]], int, int]:
    """Canonicalize an edge iterable: (min, max) order, first occurrence kept.

    Returns (edges, dropped_self_loops, dropped_duplicates).
    """
    edges = []
    seen = set()
    self_loops = 0
    duplicates = 0
    for u, v in pairs:
        u, v = int(u), int(v)
        if u == v:
            self_loops += 1
            continue
        key = (min(u, v), max(u, v))
        if key in seen:
            duplicates += 1
            continue
        seen.add(key)
        edges.append(key)
    return edges, self_loops, duplicates


def adjacency_matrix(g: Graph) -> np.ndarray:
    """Dense symmetric 0/1 adjacency with zero diagonal."""
    a = np.zeros((g.n_nodes, g.n_nodes))
    for u, v in g.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


def _edge_dense(n, edges):
    a = np.zeros((n, n))
    for u, v in edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


def random_walk_normalize(g: Graph) -> np.ndarray:
    """Row-stochastic propagation operator: rows of (A + I) divided by their sums."""
    a = adjacency_matrix(g) + np.eye(g.n_nodes)
    return a / a.sum(axis=1, keepdims=True)


def symmetric_normalize(adj: np.ndarray) -> np.ndarray:
    """D^-1/2 (adj + I) D^-1/2 with degrees taken from (adj + I)."""
    adj = as_matrix(adj, "adj")
    check_symmetric(adj, "adj")
    if adj.size and adj.min() < 0:
        raise ContractError("adj must be non-negative")
    if np.any(np.diag(adj) != 0):
        raise ContractError("adj must have a zero diagonal")
    a = adj + np.eye(adj.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def corrupt_features(x: np.ndarray, cfg: DistortionConfig, rng: np.random.Generator) -> np.ndarray:
    """Multiply every attribute entry by independent Gaussian noise."""
    x = as_matrix(x, "x")
    noise = rng.normal(cfg.noise_mean, cfg.noise_std, size=x.shape)
    return x * noise


def edge_similarities(g: Graph, latent: np.ndarray) -> np.ndarray:
    """Cosine similarity of the latent rows at each edge's endpoints."""
    latent = as_matrix(latent, "latent")
    if latent.shape[0] != g.n_nodes:
        raise ContractError(
            f"latent has {latent.shape[0]} rows for {g.n_nodes} nodes"
        )
    norms = np.sqrt((latent ** 2).sum(axis=1))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateRowError(zero[0], f"latent row {zero[0]} has zero norm")
    unit = latent / norms[:, None]
    if not g.edges:
        return np.zeros(0)
    e = np.asarray(g.edges)
    return (unit[e[:, 0]] * unit[e[:, 1]]).sum(axis=1)


def mask_edges(g: Graph, latent: np.ndarray, cfg: DistortionConfig) -> np.ndarray:
    """Drop the floor(mask_fraction * |E|) least-similar edges, renormalize.

    Ties in similarity are broken by ascending edge index. Returns the
    symmetrically normalized masked adjacency.
    """
    sims = edge_similarities(g, latent)
    n_drop = int(np.floor(cfg.mask_fraction * g.n_edges))
    order = np.argsort(sims, kind="stable")
    dropped = set(order[:n_drop].tolist())
    kept = [e for i, e in enumerate(g.edges) if i not in dropped]
    return symmetric_normalize(_edge_dense(g.n_nodes, kept))


def ppr_diffusion(g: Graph, cfg: DistortionConfig) -> np.ndarray:
    """Personalized-PageRank diffusion alpha (I - (1-alpha) A_sym)^-1."""
    a_sym = symmetric_normalize(adjacency_matrix(g))
    alpha = cfg.teleport_alpha
    n = g.n_nodes
    system = np.eye(n) - (1.0 - alpha) * a_sym
    try:
        out = alpha * np.linalg.solve(system, np.eye(n))
    except np.linalg.LinAlgError as exc:
        raise DomainError(f"diffusion system is singular: {exc}") from None
    out = 0.5 * (out + out.T)
    low = out.min()
    if low < -1e-9:
        raise DomainError(f"diffusion produced negative entry {low}")
    np.maximum(out, 0.0, out=out)
    return out


def make_views(g: Graph, latent: np.ndarray, cfg: DistortionConfig,
               rng: np.random.Generator):
    """Build the two distorted views.

    Returns ((x_tilde, a_masked), (x_tilde, a_diffused)); both views share the
    same corrupted attribute matrix object.
    """
    x_tilde = corrupt_features(g.attributes, cfg, rng)
    a_masked = mask_edges(g, latent, cfg)
    a_diffused = ppr_diffusion(g, cfg)
    return (x_tilde, a_masked), (x_tilde, a_diffused)
