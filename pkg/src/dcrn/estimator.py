"""Scikit-learn style front end for the deep graph clustering pipeline."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.exceptions import NotFittedError

from .errors import ContractError
from .graph import DistortionConfig, Graph, canonical_edges
from .losses import LossWeights
from .model import ModelConfig
from .optim import TrainConfig, run_pipeline
from .validation import as_edge_array, as_matrix


class DCRN(BaseEstimator, ClusterMixin):
    """Deep graph clustering by dual cross-view correlation reduction.

    The estimator trains a siamese two-layer graph encoder on two distorted
    views of one attributed graph (edge-masked and diffusion-smoothed),
    reduces cross-view sample and feature correlation toward the identity,
    and clusters the fused embedding with K-means.

    Parameters mirror the training configuration; ``fit`` needs the node
    attribute matrix plus the graph structure (``edges`` pairs or a dense
    ``adjacency``).

    Examples
    --------
    >>> est = DCRN(n_clusters=3, random_state=0)
    >>> labels = est.fit_predict(features, edges=edge_pairs)
    """

    def __init__(self, n_clusters=2, *, hidden_dim=256, latent_dim=20,
                 readout_k=None, lr=1e-3, pretrain_epochs=30, init_epochs=100,
                 train_epochs=400, gamma=1000.0, kl_weight=10.0, noise_mean=1.0,
                 noise_std=0.1, mask_fraction=0.10, teleport_alpha=0.2,
                 ablation="P-D", normalize_embedding=False, random_state=0):
        self.n_clusters = n_clusters
        self.hidden_dim = hidden_dim
        self.latent_dim = latent_dim
        self.readout_k = readout_k
        self.lr = lr
        self.pretrain_epochs = pretrain_epochs
        self.init_epochs = init_epochs
        self.train_epochs = train_epochs
        self.gamma = gamma
        self.kl_weight = kl_weight
        self.noise_mean = noise_mean
        self.noise_std = noise_std
        self.mask_fraction = mask_fraction
        self.teleport_alpha = teleport_alpha
        self.ablation = ablation
        self.normalize_embedding = normalize_embedding
        self.random_state = random_state

    def _build_config(self, n_features):
        model = ModelConfig(
            input_dim=n_features,
            n_clusters=self.n_clusters,
            hidden_dim=self.hidden_dim,
            latent_dim=self.latent_dim,
            readout_k=self.readout_k,
            normalize_embedding=self.normalize_embedding,
        )
        return TrainConfig(
            model=model,
            lr=self.lr,
            pretrain_epochs=self.pretrain_epochs,
            init_epochs=self.init_epochs,
            train_epochs=self.train_epochs,
            weights=LossWeights(gamma=self.gamma, lam=self.kl_weight),
            distortion=DistortionConfig(
                noise_mean=self.noise_mean,
                noise_std=self.noise_std,
                mask_fraction=self.mask_fraction,
                teleport_alpha=self.teleport_alpha,
            ),
            seed=self.random_state,
            ablation=self.ablation,
        )

    def _build_graph(self, X, edges, adjacency):
        X = as_matrix(X, "X")
        if (edges is None) == (adjacency is None):
            raise ContractError("provide exactly one of edges= or adjacency=")
        n = X.shape[0]
        if edges is not None:
            pairs = as_edge_array(edges, n)
        else:
            adj = as_matrix(adjacency, "adjacency")
            if adj.shape != (n, n):
                raise ContractError(
                    f"adjacency must be ({n}, {n}) for {n} samples, got {adj.shape}"
                )
            us, vs = np.nonzero(np.triu(adj, k=1))
            pairs = np.stack([us, vs], axis=1)
        clean, _, _ = canonical_edges(pairs)
        return Graph(n_nodes=n, edges=clean, attributes=X)

    def fit(self, X, y=None, *, edges=None, adjacency=None):
        """Train on one attributed graph and cluster its nodes.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
            Node attribute matrix.
        y : ignored
        edges : array-like of shape (n_edges, 2), optional
            Undirected edge index pairs.
        adjacency : array-like of shape (n_samples, n_samples), optional
            Dense adjacency; nonzero upper-triangle entries become edges.
        """
        graph = self._build_graph(X, edges, adjacency)
        cfg = self._build_config(graph.feature_dim)
        result = run_pipeline(graph, cfg)
        self.n_features_in_ = graph.feature_dim
        self.labels_ = result.assignments
        self.embedding_ = result.embedding
        self.cluster_centers_ = result.cluster.centers
        self.inertia_ = result.cluster.inertia
        self.loss_history_ = result.reports
        self.params_ = result.params
        return self

    def fit_transform(self, X, y=None, **fit_params):
        """Fit and return the fused node embedding."""
        return self.fit(X, y, **fit_params).embedding_

    def transform(self, X=None):
        """Return the fused node embedding from the fitted graph.

        The model is transductive: it embeds the graph it was trained on, so
        ``X`` must be None or identical in shape to the training input.
        """
        if not hasattr(self, "embedding_"):
            raise NotFittedError("fit must be called before transform")
        if X is not None and np.shape(X)[0] != self.embedding_.shape[0]:
            raise ContractError("transform only embeds the fitted graph")
        return self.embedding_
