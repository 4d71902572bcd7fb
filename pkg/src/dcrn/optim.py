"""Adam and the three-phase training procedure: reconstruction pretraining,
center initialization with a reconstruction+KL stabilization phase, then the
joint objective over the two distorted views.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DegenerateRowError, DivergenceError
from .graph import (
    DistortionConfig,
    Graph,
    adjacency_matrix,
    corrupt_features,
    mask_edges,
    ppr_diffusion,
    random_walk_normalize,
    symmetric_normalize,
)
from .losses import (
    ABLATIONS,
    LossReport,
    LossWeights,
    kl_clustering_loss,
    feature_correlation_loss,
    propagation_loss,
    reconstruction_loss,
    sample_correlation_loss,
    total_loss,
)
from .metrics import ClusterResult, MetricsReport, evaluate_clustering, kmeans
from .model import (
    ModelConfig,
    ModelParams,
    _decode_nodes,
    _encode_nodes,
    _fuse_nodes,
    _readout_nodes,
    _soft_assign_nodes,
    _structure_nodes,
    encode,
    init_params,
    target_distribution,
)


@dataclass
class TrainConfig:
    model: ModelConfig
    lr: float = 1e-3
    pretrain_epochs: int = 30
    init_epochs: int = 100
    train_epochs: int = 400
    weights: LossWeights = field(default_factory=LossWeights)
    distortion: DistortionConfig = field(default_factory=DistortionConfig)
    seed: int = 0
    ablation: str = "P-D"

    def __post_init__(self):
        if self.lr < 0:
            raise ContractError(f"lr must be non-negative, got {self.lr}")
        for name in ("pretrain_epochs", "init_epochs", "train_epochs"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        if self.ablation not in ABLATIONS:
            raise ContractError(
                f"unknown ablation {self.ablation!r}, expected one of {sorted(ABLATIONS)}"
            )


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)


def adam_step(params: dict, grads: dict, state: AdamState) -> None:
    """One bias-corrected Adam update, applied in place."""
    missing = set(params) - set(grads)
    if missing:
        raise ContractError(f"gradients missing for {sorted(missing)}")
    state.step_count += 1
    t = state.step_count
    for name, theta in params.items():
        g = grads[name]
        if not np.isfinite(g).all():
            raise DivergenceError(f"gradient for {name!r} is non-finite")
        m = state.first_moment.setdefault(name, np.zeros_like(theta))
        v = state.second_moment.setdefault(name, np.zeros_like(theta))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        theta -= state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
        if not np.isfinite(theta).all():
            raise DivergenceError(f"parameter {name!r} became non-finite")


def _with_context(exc, context):
    wrapped = type(exc)(f"{context}: {exc}")
    if isinstance(exc, DegenerateRowError):
        wrapped = DegenerateRowError(exc.row, f"{context}: {exc}")
    return wrapped


def _reconstruction_pass(x, a_sym, a_rw, params, with_kl, weights):
    """One undistorted forward pass on a fresh tape.

    Returns (loss node, leaves). With ``with_kl`` the Student-t head and the
    sharpened target are included, which requires initialized centers.
    """
    tape = ad.Tape()
    leaves = {name: tape.leaf(arr, name) for name, arr in params.matrices().items()}
    x_c = tape.constant(x)
    a_sym_c = tape.constant(a_sym)
    z = _encode_nodes(x_c, a_sym_c, leaves["enc_w1"], leaves["enc_w2"])
    x_hat = _decode_nodes(z, a_sym_c, leaves["dec_w1"], leaves["dec_w2"])
    a_hat = _structure_nodes(z)
    l_rec = reconstruction_loss(x, x_hat, a_rw, a_hat)
    if not with_kl:
        return l_rec, None, leaves
    q = _soft_assign_nodes(z, leaves["centers"])
    p = target_distribution(q.value)
    l_kl = kl_clustering_loss(p, q)
    total = l_rec + weights.lam * l_kl
    return total, (float(l_rec.value[0, 0]), float(l_kl.value[0, 0]),
                   float(total.value[0, 0])), leaves


def pretrain(g: Graph, cfg: TrainConfig, rng: np.random.Generator | None = None,
             params: ModelParams | None = None, return_history: bool = False):
    """Reconstruction-only pretraining on the undistorted graph."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if params is None:
        params = init_params(cfg.model, rng)
    x = g.attributes
    a_sym = symmetric_normalize(adjacency_matrix(g))
    a_rw = random_walk_normalize(g)
    state = AdamState(lr=cfg.lr)
    history = []
    for epoch in range(cfg.pretrain_epochs):
        try:
            loss, _, _ = _reconstruction_pass(x, a_sym, a_rw, params, False, cfg.weights)
            grads = ad.backward(loss)
            adam_step(params.matrices(), grads, state)
        except (DivergenceError, DegenerateRowError) as exc:
            raise _with_context(exc, f"pretrain epoch {epoch}") from exc
        history.append(float(loss.value[0, 0]))
    if return_history:
        return params, history
    return params


def embed(g: Graph, params: ModelParams) -> np.ndarray:
    """Undistorted embedding of the graph under the current encoder."""
    return encode(g.attributes, symmetric_normalize(adjacency_matrix(g)), params)


def init_centers(z: np.ndarray, n_clusters: int, seed: int = 0) -> np.ndarray:
    """K-means cluster centers over an embedding."""
    return kmeans(z, n_clusters, seed=seed).centers


def _joint_loss(tape, leaves, x_tilde, x, mats, cfg, fixed_p=None):
    """Assemble the two-view objective from existing leaves on ``tape``.

    ``mats`` holds the precomputed constant operators (a_masked, a_diffused,
    a_sym, a_rw). ``fixed_p`` overrides the per-pass sharpened target (used
    by gradient checking, where the target must not move with the
    parameters).
    """
    a_masked, a_diffused, a_sym, a_rw = mats
    x_t = tape.constant(x_tilde)
    a_m = tape.constant(a_masked)
    a_d = tape.constant(a_diffused)
    a_s = tape.constant(a_sym)
    a_r = tape.constant(a_rw)

    z1 = _encode_nodes(x_t, a_m, leaves["enc_w1"], leaves["enc_w2"])
    z2 = _encode_nodes(x_t, a_d, leaves["enc_w1"], leaves["enc_w2"])
    z = _fuse_nodes(z1, z2)

    q = _soft_assign_nodes(z, leaves["centers"])
    p = target_distribution(q.value) if fixed_p is None else fixed_p
    if "readout_centers" in leaves:
        pool_q = _soft_assign_nodes(z, leaves["readout_centers"])
    else:
        pool_q = q
    zt1 = _readout_nodes(z1, pool_q)
    zt2 = _readout_nodes(z2, pool_q)

    l_n = sample_correlation_loss(z1, z2)
    l_f = feature_correlation_loss(zt1, zt2)
    l_r = propagation_loss(z, a_r)
    x_hat = _decode_nodes(z, a_s, leaves["dec_w1"], leaves["dec_w2"])
    a_hat = _structure_nodes(z)
    l_rec = reconstruction_loss(x, x_hat, a_rw, a_hat)
    l_kl = kl_clustering_loss(p, q)
    return total_loss(l_n, l_f, l_r, l_rec, l_kl, cfg.weights, cfg.ablation)


def _joint_pass(x_tilde, x, mats, params, cfg, fixed_p=None):
    """One two-view forward pass on a fresh tape; returns (total, report, leaves)."""
    tape = ad.Tape()
    leaves = {name: tape.leaf(arr, name) for name, arr in params.matrices().items()}
    total, report = _joint_loss(tape, leaves, x_tilde, x, mats, cfg, fixed_p)
    return total, report, leaves


def train(g: Graph, cfg: TrainConfig, params: ModelParams,
          rng: np.random.Generator | None = None,
          views: tuple[np.ndarray, np.ndarray] | None = None,
          ) -> tuple[ModelParams, list[LossReport]]:
    """Center-stabilization phase followed by the joint two-view phase.

    ``params`` must carry initialized centers. ``views`` optionally supplies
    the precomputed (masked, diffused) adjacencies; otherwise they are built
    here from the entry embedding, which at this point is the pretraining
    embedding.
    """
    if params.centers is None:
        raise ContractError("train requires initialized cluster centers")
    if cfg.model.resolved_k != cfg.model.n_clusters and params.readout_centers is None:
        raise ContractError("train requires readout centers when readout_k != n_clusters")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    x = g.attributes
    a_sym = symmetric_normalize(adjacency_matrix(g))
    a_rw = random_walk_normalize(g)
    if views is None:
        latent = embed(g, params)
        views = (mask_edges(g, latent, cfg.distortion),
                 ppr_diffusion(g, cfg.distortion))
    a_masked, a_diffused = views
    mats = (a_masked, a_diffused, a_sym, a_rw)

    state = AdamState(lr=cfg.lr)
    reports: list[LossReport] = []

    for epoch in range(cfg.init_epochs):
        try:
            loss, parts, _ = _reconstruction_pass(x, a_sym, a_rw, params, True, cfg.weights)
            grads = ad.backward(loss)
            adam_step(params.matrices(), grads, state)
        except (DivergenceError, DegenerateRowError) as exc:
            raise _with_context(exc, f"center-stabilization epoch {epoch}") from exc
        l_rec, l_kl, total = parts
        reports.append(LossReport(l_n=0.0, l_f=0.0, l_r=0.0,
                                  l_rec=l_rec, l_kl=l_kl, total=total))

    noise_x = None
    for epoch in range(cfg.train_epochs):
        if noise_x is None or not cfg.distortion.freeze_noise:
            noise_x = corrupt_features(x, cfg.distortion, rng)
        try:
            loss, report, _ = _joint_pass(noise_x, x, mats, params, cfg)
            grads = ad.backward(loss)
            adam_step(params.matrices(), grads, state)
        except (DivergenceError, DegenerateRowError) as exc:
            raise _with_context(exc, f"joint epoch {epoch}") from exc
        reports.append(report)
    return params, reports


@dataclass
class RunResult:
    params: ModelParams
    assignments: np.ndarray
    embedding: np.ndarray
    reports: list[LossReport]
    pretrain_history: list[float]
    cluster: ClusterResult
    metrics: MetricsReport | None


def run_pipeline(g: Graph, cfg: TrainConfig) -> RunResult:
    """Full procedure: pretrain, initialize centers, train, cluster, score.

    The final embedding is an evaluation forward pass (undistorted features
    on the two distorted adjacencies, fused) so metrics do not depend on the
    last epoch's noise draw.
    """
    rng = np.random.default_rng(cfg.seed)
    params = init_params(cfg.model, rng)
    params, history = pretrain(g, cfg, rng=rng, params=params, return_history=True)

    latent = embed(g, params)
    params.centers = init_centers(latent, cfg.model.n_clusters, seed=cfg.seed)
    k = cfg.model.resolved_k
    if k != cfg.model.n_clusters:
        params.readout_centers = init_centers(latent, k, seed=cfg.seed)
    views = (mask_edges(g, latent, cfg.distortion), ppr_diffusion(g, cfg.distortion))

    params, reports = train(g, cfg, params, rng=rng, views=views)

    z1 = encode(g.attributes, views[0], params)
    z2 = encode(g.attributes, views[1], params)
    z = 0.5 * (z1 + z2)
    z_cluster = z
    if cfg.model.normalize_embedding:
        norms = np.sqrt((z ** 2).sum(axis=1, keepdims=True))
        norms[norms == 0.0] = 1.0
        z_cluster = z / norms
    cluster = kmeans(z_cluster, cfg.model.n_clusters, seed=cfg.seed)
    metrics = None
    if g.labels is not None:
        metrics = evaluate_clustering(cluster.assignments, g.labels)
    return RunResult(params=params, assignments=cluster.assignments, embedding=z,
                     reports=reports, pretrain_history=history, cluster=cluster,
                     metrics=metrics)


def config_for_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    """Copy of a config with a different seed (shared everything else)."""
    return replace(cfg, seed=seed)
