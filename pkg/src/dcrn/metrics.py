"""K-means clustering and Hungarian-matched evaluation metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import adjusted_rand_score, f1_score, normalized_mutual_info_score

from .errors import ContractError
from .validation import as_labels, as_matrix


@dataclass
class ClusterResult:
    assignments: np.ndarray
    centers: np.ndarray
    inertia: float


@dataclass
class MetricsReport:
    acc: float
    nmi: float
    ari: float
    f1: float

    FIELDS = ("acc", "nmi", "ari", "f1")

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.FIELDS}


def _sq_distances(z, centers):
    zz = (z ** 2).sum(axis=1, keepdims=True)
    cc = (centers ** 2).sum(axis=1)
    d2 = zz - 2.0 * (z @ centers.T) + cc[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plus_plus_init(z, n_clusters, rng):
    """Standard k-means++ seeding; degenerate duplicate points fall back to
    the lowest unchosen index."""
    n = z.shape[0]
    chosen = np.empty(n_clusters, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = ((z - z[chosen[0]]) ** 2).sum(axis=1)
    for k in range(1, n_clusters):
        total = d2.sum()
        if total == 0.0:
            remaining = np.setdiff1d(np.arange(n), chosen[:k])
            chosen[k] = remaining[0]
        else:
            chosen[k] = rng.choice(n, p=d2 / total)
        d2 = np.minimum(d2, ((z - z[chosen[k]]) ** 2).sum(axis=1))
    return z[chosen].copy()


def _repair_empty(z, centers, assign, d2):
    """Give every empty cluster the point currently farthest from its center."""
    n_clusters = centers.shape[0]
    counts = np.bincount(assign, minlength=n_clusters)
    while (counts == 0).any():
        empty = int(np.flatnonzero(counts == 0)[0])
        point_cost = d2[np.arange(len(assign)), assign]
        # never steal a cluster's only member
        stealable = counts[assign] >= 2
        point_cost = np.where(stealable, point_cost, -np.inf)
        victim = int(np.argmax(point_cost))
        counts[assign[victim]] -= 1
        assign[victim] = empty
        counts[empty] += 1
        centers[empty] = z[victim]
        d2[:, empty] = ((z - centers[empty]) ** 2).sum(axis=1)
    return centers, assign, d2


def _lloyd(z, n_clusters, rng, max_iters, tol):
    centers = _plus_plus_init(z, n_clusters, rng)
    history = []
    assign = None
    for _ in range(max_iters):
        d2 = _sq_distances(z, centers)
        assign = np.argmin(d2, axis=1)
        if np.bincount(assign, minlength=n_clusters).min() == 0:
            centers, assign, d2 = _repair_empty(z, centers, assign, d2)
        inertia = float(d2[np.arange(z.shape[0]), assign].sum())
        history.append(inertia)
        new_centers = np.empty_like(centers)
        for k in range(n_clusters):
            new_centers[k] = z[assign == k].mean(axis=0)
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        if shift < tol:
            break
    d2 = _sq_distances(z, centers)
    assign = np.argmin(d2, axis=1)
    if np.bincount(assign, minlength=n_clusters).min() == 0:
        centers, assign, d2 = _repair_empty(z, centers, assign, d2)
    inertia = float(d2[np.arange(z.shape[0]), assign].sum())
    history.append(inertia)
    return assign, centers, inertia, history


def kmeans(z, n_clusters, seed: int = 0, max_iters: int = 300, tol: float = 1e-6,
           n_restarts: int = 1, return_history: bool = False):
    """Deterministic k-means++ / Lloyd clustering.

    Restarts are seeded independently from (seed, restart index); the winner
    is the restart with the lexicographically smallest (inertia, index).
    """
    z = as_matrix(z, "z")
    if n_clusters < 1:
        raise ContractError(f"n_clusters must be positive, got {n_clusters}")
    if n_clusters > z.shape[0]:
        raise ContractError(
            f"n_clusters {n_clusters} exceeds number of points {z.shape[0]}"
        )
    if n_restarts < 1:
        raise ContractError(f"n_restarts must be positive, got {n_restarts}")
    best = None
    for restart in range(n_restarts):
        rng = np.random.default_rng([seed, restart])
        assign, centers, inertia, history = _lloyd(z, n_clusters, rng, max_iters, tol)
        if best is None or inertia < best[2]:
            best = (assign, centers, inertia, history)
    assign, centers, inertia, history = best
    result = ClusterResult(assignments=assign, centers=centers, inertia=inertia)
    if return_history:
        return result, history
    return result


def hungarian_map(pred, truth, n_classes: int) -> np.ndarray:
    """Cluster-to-class bijection maximizing the matched count.

    Returns perm with perm[cluster] = class, computed by solving the linear
    assignment problem on the negated contingency table.
    """
    pred = as_labels(pred, "pred")
    truth = as_labels(truth, "truth")
    if pred.shape != truth.shape:
        raise ContractError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if n_classes < 1:
        raise ContractError(f"n_classes must be positive, got {n_classes}")
    if max(pred.max(), truth.max()) >= n_classes:
        raise ContractError(
            f"labels exceed n_classes={n_classes}: pred max {pred.max()}, "
            f"truth max {truth.max()}"
        )
    contingency = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(contingency, (pred, truth), 1)
    rows, cols = linear_sum_assignment(-contingency)
    perm = np.empty(n_classes, dtype=np.int64)
    perm[rows] = cols
    return perm


def evaluate_clustering(pred, truth, nmi_average: str = "arithmetic") -> MetricsReport:
    """ACC / NMI / ARI / macro-F1 of a predicted clustering against truth.

    ACC and F1 are computed after the Hungarian relabeling; F1 averages over
    all classes with empty classes contributing zero.
    """
    pred = as_labels(pred, "pred")
    truth = as_labels(truth, "truth")
    if pred.shape != truth.shape:
        raise ContractError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if nmi_average not in ("arithmetic", "geometric"):
        raise ContractError(f"nmi_average must be arithmetic or geometric, got {nmi_average!r}")
    n_classes = int(max(pred.max(), truth.max())) + 1
    perm = hungarian_map(pred, truth, n_classes)
    mapped = perm[pred]
    acc = float(np.mean(mapped == truth))
    nmi = float(normalized_mutual_info_score(truth, pred, average_method=nmi_average))
    ari = float(adjusted_rand_score(truth, pred))
    f1 = float(f1_score(truth, mapped, labels=np.arange(n_classes),
                        average="macro", zero_division=0))
    return MetricsReport(acc=acc, nmi=nmi, ari=ari, f1=f1)


def aggregate_reports(reports) -> tuple[MetricsReport, MetricsReport]:
    """Mean and population standard deviation per metric over repeated runs."""
    reports = list(reports)
    if not reports:
        raise ContractError("aggregate_reports needs at least one report")
    stacked = {
        name: np.array([getattr(r, name) for r in reports])
        for name in MetricsReport.FIELDS
    }
    mean = MetricsReport(**{k: float(v.mean()) for k, v in stacked.items()})
    std = MetricsReport(**{k: float(v.std()) for k, v in stacked.items()})
    return mean, std
