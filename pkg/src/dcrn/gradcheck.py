"""Finite-difference verification of every training objective.

Each loss is evaluated on a batch of random small graphs; tape gradients are
compared entrywise against central differences. The report maps loss name to
its worst relative error over the whole batch.
"""
from __future__ import annotations

import numpy as np

from .autodiff import grad_check
from .graph import (
    DistortionConfig,
    Graph,
    adjacency_matrix,
    mask_edges,
    ppr_diffusion,
    random_walk_normalize,
    symmetric_normalize,
)
from .losses import (
    LossWeights,
    feature_correlation_loss,
    kl_clustering_loss,
    propagation_loss,
    reconstruction_loss,
    sample_correlation_loss,
)
from .model import ModelConfig, _soft_assign_nodes, encode, init_params, soft_assign, target_distribution
from .optim import TrainConfig, _joint_loss

LOSS_NAMES = ("sample_correlation", "feature_correlation", "propagation",
              "reconstruction", "kl", "total")

TOLERANCE = 1e-4


def _random_graph(rng, n):
    # path backbone keeps every node connected so no embedding row can be
    # exactly zero (isolated nodes with all-negative preactivations would be)
    pairs = {(u, u + 1) for u in range(n - 1)}
    pairs |= {(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.4}
    x = rng.uniform(-1.0, 1.0, size=(n, 3))
    return Graph(n_nodes=n, edges=sorted(pairs), attributes=x)


def run_gradient_checks(seed: int = 0, n_graphs: int = 20,
                        step: float = 1e-5) -> dict[str, float]:
    """Worst relative gradient error per loss over ``n_graphs`` random cases."""
    worst = {name: 0.0 for name in LOSS_NAMES}
    for case in range(n_graphs):
        rng = np.random.default_rng([seed, case])
        n = int(rng.integers(4, 9))
        d_lat = int(rng.integers(2, 6))
        d_feat = int(rng.integers(2, 6))
        n_clusters = int(rng.integers(2, min(n, 4) + 1))

        z1 = rng.uniform(-1.0, 1.0, size=(n, d_lat))
        z2 = rng.uniform(-1.0, 1.0, size=(n, d_lat))
        worst["sample_correlation"] = max(
            worst["sample_correlation"],
            grad_check(lambda L: sample_correlation_loss(L[0], L[1]), [z1, z2], step),
        )

        zt1 = rng.uniform(-1.0, 1.0, size=(d_lat, n_clusters))
        zt2 = rng.uniform(-1.0, 1.0, size=(d_lat, n_clusters))
        worst["feature_correlation"] = max(
            worst["feature_correlation"],
            grad_check(lambda L: feature_correlation_loss(L[0], L[1]), [zt1, zt2], step),
        )

        g = _random_graph(rng, n)
        a_rw = random_walk_normalize(g)
        worst["propagation"] = max(
            worst["propagation"],
            grad_check(
                lambda L: propagation_loss(L[0], L[0].tape.constant(a_rw)), [z1], step
            ),
        )

        x = g.attributes
        x_hat = rng.uniform(-1.0, 1.0, size=x.shape)
        a_hat = rng.uniform(0.1, 0.9, size=(n, n))
        worst["reconstruction"] = max(
            worst["reconstruction"],
            grad_check(
                lambda L: reconstruction_loss(x, L[0], a_rw, L[1]), [x_hat, a_hat], step
            ),
        )

        centers = rng.uniform(-1.0, 1.0, size=(n_clusters, d_lat))
        p_fixed = target_distribution(soft_assign(z1, centers))
        worst["kl"] = max(
            worst["kl"],
            grad_check(
                lambda L: kl_clustering_loss(p_fixed, _soft_assign_nodes(L[0], L[1])),
                [z1, centers], step,
            ),
        )

        # hidden width stays comfortably above the feature dims so no node's
        # whole hidden row lands in the dead half of the relu
        model_cfg = ModelConfig(input_dim=d_feat, n_clusters=n_clusters,
                                hidden_dim=int(rng.integers(8, 11)), latent_dim=d_lat)
        cfg = TrainConfig(model=model_cfg,
                          distortion=DistortionConfig(mask_fraction=0.3),
                          weights=LossWeights())
        params = init_params(model_cfg, rng)
        params.centers = rng.uniform(-1.0, 1.0, size=(n_clusters, d_lat))
        gx = rng.uniform(-1.0, 1.0, size=(n, d_feat))
        graph = Graph(n_nodes=n, edges=g.edges, attributes=gx)
        a_sym = symmetric_normalize(adjacency_matrix(graph))
        a_rw_g = random_walk_normalize(graph)
        latent = encode(gx, a_sym, params)
        mats = (mask_edges(graph, latent, cfg.distortion),
                ppr_diffusion(graph, cfg.distortion), a_sym, a_rw_g)

        zv1 = encode(gx, mats[0], params)
        zv2 = encode(gx, mats[1], params)
        q0 = soft_assign(0.5 * (zv1 + zv2), params.centers)
        p0 = target_distribution(q0)
        names = list(params.matrices().keys())
        values = [params.matrices()[name] for name in names]

        def composite(leaves):
            tape = leaves[0].tape
            total, _ = _joint_loss(tape, dict(zip(names, leaves)), gx, gx, mats,
                                   cfg, fixed_p=p0)
            return total

        worst["total"] = max(worst["total"], grad_check(composite, values, step))
    return worst
