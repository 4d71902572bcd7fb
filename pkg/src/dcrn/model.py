"""Siamese two-layer graph encoder, decoders, fusion, readout, and the
Student-t clustering head, plus flat-binary parameter checkpoints.

Each component exists in two forms: a node-level builder (prefixed with an
underscore) used inside training tapes, and a value-level wrapper with the
public signature that runs the same chain on a throwaway tape. This keeps a
single implementation for both paths.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, EmptyClusterError, ShapeError
from .validation import as_matrix


@dataclass
class ModelConfig:
    input_dim: int
    n_clusters: int
    hidden_dim: int = 256
    latent_dim: int = 20
    readout_k: int | None = None
    normalize_embedding: bool = False

    def __post_init__(self):
        for name in ("input_dim", "n_clusters", "hidden_dim", "latent_dim"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be positive, got {getattr(self, name)}")
        if self.readout_k is not None and self.readout_k < 1:
            raise ContractError(f"readout_k must be positive, got {self.readout_k}")

    @property
    def resolved_k(self) -> int:
        return self.n_clusters if self.readout_k is None else self.readout_k


@dataclass
class ModelParams:
    """All trainable matrices. ``centers`` appears after initialization;
    ``readout_centers`` only when the pooling width differs from n_clusters."""

    enc_w1: np.ndarray
    enc_w2: np.ndarray
    dec_w1: np.ndarray
    dec_w2: np.ndarray
    centers: np.ndarray | None = None
    readout_centers: np.ndarray | None = None

    _ORDER = ("enc_w1", "enc_w2", "dec_w1", "dec_w2", "centers", "readout_centers")

    def matrices(self) -> dict[str, np.ndarray]:
        """Live references to every present matrix, in fixed order."""
        out = {}
        for name in self._ORDER:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    def copy(self) -> "ModelParams":
        kwargs = {name: None for name in self._ORDER}
        kwargs.update({name: arr.copy() for name, arr in self.matrices().items()})
        return ModelParams(**kwargs)


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> ModelParams:
    """Uniform [-1/sqrt(fan_in), 1/sqrt(fan_in)] weight initialization."""

    def layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return ModelParams(
        enc_w1=layer(cfg.input_dim, cfg.hidden_dim),
        enc_w2=layer(cfg.hidden_dim, cfg.latent_dim),
        dec_w1=layer(cfg.latent_dim, cfg.hidden_dim),
        dec_w2=layer(cfg.hidden_dim, cfg.input_dim),
    )


# ---------------------------------------------------------------------------
# node-level builders


def _propagate(a, x, w1, w2):
    """a @ relu(a @ x @ w1) @ w2, the shared two-layer propagation chain."""
    hidden = ad.relu(ad.matmul(a, ad.matmul(x, w1)))
    return ad.matmul(a, ad.matmul(hidden, w2))


def _encode_nodes(x_tilde, a_view, w1, w2):
    return _propagate(a_view, x_tilde, w1, w2)


def _decode_nodes(z, a_view, w1, w2):
    return _propagate(a_view, z, w1, w2)


def _structure_nodes(z):
    return ad.sigmoid(ad.matmul(z, ad.transpose(z)))


def _fuse_nodes(z1, z2):
    if z1.value.shape != z2.value.shape:
        raise ShapeError(f"fuse: shapes {z1.value.shape} and {z2.value.shape} differ")
    return 0.5 * (z1 + z2)


def _soft_assign_nodes(z, centers):
    """Student-t (one degree of freedom) soft assignment, rows sum to one."""
    zz = ad.sum_rows(ad.square(z))
    cc = ad.transpose(ad.sum_rows(ad.square(centers)))
    cross = ad.matmul(z, ad.transpose(centers))
    dist2 = zz - 2.0 * cross + cc
    kernel = 1.0 / (1.0 + dist2)
    return kernel / ad.sum_rows(kernel)


def _readout_nodes(z_view, q):
    """Soft-assignment-weighted cluster mean pooling, (N, d) -> (d, K)."""
    mass = q.value.sum(axis=0)
    empty = np.flatnonzero(mass == 0.0)
    if empty.size:
        raise EmptyClusterError(f"readout: cluster column {empty[0]} has zero mass")
    pooled = ad.matmul(ad.transpose(z_view), q)
    return pooled / ad.sum_cols(q)


# ---------------------------------------------------------------------------
# value-level wrappers


def _run(fn, *values):
    tape = ad.Tape()
    nodes = [tape.constant(as_matrix(v)) for v in values]
    return fn(*nodes).value


def encode(x_tilde, a_view, p: ModelParams) -> np.ndarray:
    """Two-layer propagation embedding of one view."""
    return _run(lambda x, a, w1, w2: _encode_nodes(x, a, w1, w2),
                x_tilde, a_view, p.enc_w1, p.enc_w2)


def decode_attributes(z, a_view, p: ModelParams) -> np.ndarray:
    """Attribute reconstruction from the fused embedding."""
    return _run(lambda zn, a, w1, w2: _decode_nodes(zn, a, w1, w2),
                z, a_view, p.dec_w1, p.dec_w2)


def decode_structure(z) -> np.ndarray:
    """Edge-probability reconstruction sigmoid(z z^T)."""
    return _run(_structure_nodes, z)


def fuse(z1, z2) -> np.ndarray:
    """Mean of the two view embeddings."""
    return _run(_fuse_nodes, z1, z2)


def soft_assign(z, centers) -> np.ndarray:
    """Student-t soft cluster assignment of each row of z."""
    z = as_matrix(z, "z")
    centers = as_matrix(centers, "centers")
    if z.shape[1] != centers.shape[1]:
        raise ShapeError(
            f"soft_assign: latent dims differ, z {z.shape} vs centers {centers.shape}"
        )
    return _run(_soft_assign_nodes, z, centers)


def readout(z_view, q) -> np.ndarray:
    """Pool node embeddings into per-cluster summaries using weights q."""
    z_view = as_matrix(z_view, "z_view")
    q = as_matrix(q, "q")
    if z_view.shape[0] != q.shape[0]:
        raise ShapeError(f"readout: row counts differ, {z_view.shape} vs {q.shape}")
    return _run(_readout_nodes, z_view, q)


def target_distribution(q: np.ndarray) -> np.ndarray:
    """Sharpened auxiliary target: p_ij proportional to q_ij^2 / column mass."""
    q = as_matrix(q, "q")
    mass = q.sum(axis=0)
    empty = np.flatnonzero(mass == 0.0)
    if empty.size:
        raise EmptyClusterError(f"target_distribution: column {empty[0]} has zero mass")
    weight = q * q / mass
    return weight / weight.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# checkpoints: [u32 name_len][name utf-8][u32 rows][u32 cols][float64 LE data]


def save_params(p: ModelParams, path) -> None:
    """Write every present matrix to a flat binary container."""
    with open(path, "wb") as fh:
        for name, arr in p.matrices().items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_params(path) -> ModelParams:
    """Read a checkpoint written by :func:`save_params`."""
    found: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        while True:
            head = fh.read(4)
            if not head:
                break
            if len(head) < 4:
                raise ContractError(f"checkpoint {path} is truncated")
            (name_len,) = struct.unpack("<I", head)
            name = fh.read(name_len).decode("utf-8")
            rows, cols = struct.unpack("<II", fh.read(8))
            raw = fh.read(rows * cols * 8)
            if len(raw) < rows * cols * 8:
                raise ContractError(f"checkpoint {path} is truncated in {name!r}")
            found[name] = np.frombuffer(raw, dtype="<f8").reshape(rows, cols).copy()
    unknown = set(found) - set(ModelParams._ORDER)
    if unknown:
        raise ContractError(f"checkpoint {path} has unknown matrices {sorted(unknown)}")
    missing = {"enc_w1", "enc_w2", "dec_w1", "dec_w2"} - set(found)
    if missing:
        raise ContractError(f"checkpoint {path} is missing {sorted(missing)}")
    return ModelParams(**{name: found.get(name) for name in ModelParams._ORDER})
