"""Training objectives: the two cross-view correlation losses, propagated
regularization, reconstruction, and the clustering KL term, plus their gated
weighted combination.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ContractError, DomainError, ShapeError
from .validation import as_matrix

# Which of (sample-correlation, feature-correlation, propagation) terms each
# ablation variant keeps. Reconstruction and the KL term are always present.
ABLATIONS = {
    "none": (False, False, False),
    "P": (False, False, True),
    "D": (True, True, False),
    "P-D": (True, True, True),
    "F": (False, True, False),
    "S": (True, False, False),
    "F-S": (True, True, False),
}


@dataclass
class LossWeights:
    gamma: float = 1000.0
    lam: float = 10.0

    def __post_init__(self):
        if self.gamma < 0 or self.lam < 0:
            raise ContractError(f"loss weights must be non-negative, got {self}")


@dataclass
class LossReport:
    l_n: float
    l_f: float
    l_r: float
    l_rec: float
    l_kl: float
    total: float

    FIELDS = ("l_n", "l_f", "l_r", "l_rec", "l_kl", "total")

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in self.FIELDS}


def _correlation_terms(s, n, diag_weight, off_weight):
    tape = s.tape
    eye = tape.constant(np.eye(n))
    diag = ad.hadamard(s, eye)
    on_diag = ad.square(diag - eye).sum() * diag_weight
    off_diag = ad.square(ad.hadamard(s, 1.0 - eye)).sum() * off_weight
    return on_diag + off_diag


def sample_correlation_loss(z1, z2) -> ad.Node:
    """Push the cross-view sample similarity matrix toward the identity.

    Diagonal disagreement is averaged over N, off-diagonal energy over the
    N^2 - N off-entries.
    """
    n = z1.value.shape[0]
    if z1.value.shape != z2.value.shape:
        raise ShapeError(f"shapes {z1.value.shape} and {z2.value.shape} differ")
    if n < 2:
        raise ContractError(f"need at least 2 samples, got {n}")
    s = ad.cosine_matrix(z1, z2)
    return _correlation_terms(s, n, 1.0 / n, 1.0 / (n * n - n))


def feature_correlation_loss(zt1, zt2) -> ad.Node:
    """Push the cross-view feature similarity matrix toward the identity.

    Both terms are normalized by feature-pair counts: d^2 on the diagonal,
    d^2 - d off it.
    """
    d = zt1.value.shape[0]
    if zt1.value.shape != zt2.value.shape:
        raise ShapeError(f"shapes {zt1.value.shape} and {zt2.value.shape} differ")
    if d < 2:
        raise ContractError(f"need at least 2 feature rows, got {d}")
    s = ad.cosine_matrix(zt1, zt2)
    return _correlation_terms(s, d, 1.0 / (d * d), 1.0 / (d * d - d))


def jsd_rows(a, b) -> ad.Node:
    """Mean row-wise Jensen-Shannon divergence after row softmax, natural log."""
    if a.value.shape != b.value.shape:
        raise ShapeError(f"shapes {a.value.shape} and {b.value.shape} differ")
    n = a.value.shape[0]
    p = ad.row_softmax(a)
    q = ad.row_softmax(b)
    log_m = ad.log(0.5 * (p + q))
    kl_pm = ad.hadamard(p, p.log() - log_m).sum()
    kl_qm = ad.hadamard(q, q.log() - log_m).sum()
    return (kl_pm + kl_qm) * (0.5 / n)


def propagation_loss(z, a_norm) -> ad.Node:
    """Divergence between the embedding and its one-step propagation."""
    if a_norm.value.shape != (z.value.shape[0], z.value.shape[0]):
        raise ShapeError(
            f"a_norm {a_norm.value.shape} does not match embedding {z.value.shape}"
        )
    return jsd_rows(z, ad.matmul(a_norm, z))


def reconstruction_loss(x, x_hat, a_norm, a_hat) -> ad.Node:
    """Mean squared attribute error plus mean squared structure error."""
    x = as_matrix(x, "x")
    a_norm = as_matrix(a_norm, "a_norm")
    if x.shape != x_hat.value.shape:
        raise ShapeError(f"x {x.shape} and x_hat {x_hat.value.shape} differ")
    if a_norm.shape != a_hat.value.shape:
        raise ShapeError(f"a_norm {a_norm.shape} and a_hat {a_hat.value.shape} differ")
    n, d = x.shape
    tape = x_hat.tape
    attr = ad.square(tape.constant(x) - x_hat).sum() * (1.0 / (n * d))
    structure = ad.square(tape.constant(a_norm) - a_hat).sum() * (1.0 / (n * n))
    return attr + structure


def kl_clustering_loss(p, q) -> ad.Node:
    """KL(P || Q) / N with P held constant; zero P entries contribute zero."""
    p = as_matrix(p, "p")
    if p.shape != q.value.shape:
        raise ShapeError(f"p {p.shape} and q {q.value.shape} differ")
    qv = q.value
    bad = (qv <= 0.0) & (p > 0.0)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DomainError(f"q is {qv[i, j]!r} at ({i}, {j}) where p is positive")
    n = p.shape[0]
    support = (p > 0.0).astype(np.float64)
    p_log_p = float(np.sum(p[p > 0.0] * np.log(p[p > 0.0])))
    tape = q.tape
    # off-support entries of q are replaced by 1 so the log is defined there;
    # they are then multiplied by p = 0 and contribute nothing
    q_safe = ad.hadamard(q, tape.constant(support)) + tape.constant(1.0 - support)
    cross = ad.hadamard(tape.constant(p), ad.log(q_safe)).sum()
    return (p_log_p - cross) * (1.0 / n)


def total_loss(l_n, l_f, l_r, l_rec, l_kl, weights: LossWeights,
               ablation: str = "P-D") -> tuple[ad.Node, LossReport]:
    """Weighted combination of the five terms under an ablation gate.

    The gate selects which correlation/propagation terms enter the optimized
    total; every component is still reported. With the default "P-D" gate the
    total is the full objective l_n + l_f + gamma*l_r + l_rec + lam*l_kl.
    """
    if ablation not in ABLATIONS:
        raise ContractError(f"unknown ablation {ablation!r}, expected one of {sorted(ABLATIONS)}")
    use_n, use_f, use_r = ABLATIONS[ablation]
    total = l_rec + weights.lam * l_kl
    if use_n:
        total = total + l_n
    if use_f:
        total = total + l_f
    if use_r:
        total = total + weights.gamma * l_r
    report = LossReport(
        l_n=float(l_n.value[0, 0]),
        l_f=float(l_f.value[0, 0]),
        l_r=float(l_r.value[0, 0]),
        l_rec=float(l_rec.value[0, 0]),
        l_kl=float(l_kl.value[0, 0]),
        total=float(total.value[0, 0]),
    )
    return total, report
