"""Input validation helpers shared by the library and the estimator API."""
from __future__ import annotations

import numpy as np

from .errors import ContractError, DomainError, ShapeError


def as_matrix(value, name: str = "value") -> np.ndarray:
    """Coerce ``value`` to a finite 2-D float64 array. Scalars become 1x1."""
    try:
        arr = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ShapeError(f"{name} is not numeric: {exc}") from None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.size and not np.isfinite(arr).all():
        i, j = np.argwhere(~np.isfinite(arr))[0]
        raise DomainError(f"{name} has a non-finite entry at ({i}, {j})")
    return arr


def check_square(arr: np.ndarray, name: str = "matrix") -> np.ndarray:
    if arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got {arr.shape}")
    return arr


def check_symmetric(arr: np.ndarray, name: str = "matrix") -> np.ndarray:
    check_square(arr, name)
    if not np.array_equal(arr, arr.T):
        raise ContractError(f"{name} must be symmetric")
    return arr


def as_labels(values, name: str = "labels") -> np.ndarray:
    """Coerce to a 1-D array of non-negative integer labels."""
    arr = np.asarray(values)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ContractError(f"{name} must be non-empty")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.asarray(arr, dtype=np.float64)
        if not np.isfinite(rounded).all() or not np.all(rounded == np.round(rounded)):
            raise ContractError(f"{name} must be integers")
        arr = rounded.astype(np.int64)
    arr = arr.astype(np.int64)
    if arr.min() < 0:
        raise ContractError(f"{name} must be non-negative")
    return arr


def as_edge_array(edges, n_nodes: int | None = None) -> np.ndarray:
    """Coerce to an (E, 2) int64 array of node index pairs."""
    arr = np.asarray(edges, dtype=np.int64)
    if arr.size == 0:
        return arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ShapeError(f"edges must have shape (E, 2), got {arr.shape}")
    if n_nodes is not None:
        if arr.min() < 0 or arr.max() >= n_nodes:
            raise ContractError(
                f"edge endpoints must lie in [0, {n_nodes}), got range "
                f"[{arr.min()}, {arr.max()}]"
            )
    return arr
