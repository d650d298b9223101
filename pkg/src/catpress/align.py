"""Kernel-alignment similarity between feature matrices, and its gradient.

Given two feature matrices X (n x p1) and Y (n x p2) -- one row per sample,
features flattened channel-major -- the alignment index is

    KA(X, Y) = ||Y^T X||_F^2 / (||X^T X||_F * ||Y^T Y||_F)

which lies in [0, 1], tolerates p1 != p2, and is invariant to orthogonal
transforms and isotropic scaling of either side.  No centering is applied;
a centered variant exists behind a flag for ablation experiments only.

Two evaluation routes are exposed: the textbook cross-product form and the
Gram-space form using ||Y^T X||_F^2 = <vec(X X^T), vec(Y Y^T)>, which costs
O(n^2 max(p1, p2)) instead of O(n p1 p2).  `ka` picks automatically.

Accumulation happens in float64; results are returned as float32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BatchMismatch, DegenerateInput


@dataclass
class FeatureMatrix:
    """n x p feature block tagged with the layer it was captured from."""

    data: np.ndarray
    layer_id: str = ""


def _as2d(x) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        x = x.data
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DegenerateInput(f"feature matrix must be 2-d and non-empty, got shape {arr.shape}")
    return arr


def _center(x: np.ndarray) -> np.ndarray:
    return x - x.mean(axis=0, keepdims=True)


def _prepare(x, y, centered: bool):
    xa, ya = _as2d(x), _as2d(y)
    if xa.shape[0] != ya.shape[0]:
        raise BatchMismatch(f"batch sizes differ: {xa.shape[0]} vs {ya.shape[0]}")
    if centered:
        xa, ya = _center(xa), _center(ya)
    return xa, ya


def _result_dtype(x, y):
    """float32 for float32 feature data, full precision for float64 shadows."""
    for a in (x, y):
        arr = a.data if isinstance(a, FeatureMatrix) else np.asarray(a)
        if arr.dtype == np.float64:
            return np.float64
    return np.float32


def ka_naive(x, y, centered: bool = False):
    """Direct evaluation of the alignment index via the p1 x p2 cross product."""
    xa, ya = _prepare(x, y, centered)
    num = float(np.linalg.norm(ya.T @ xa, "fro") ** 2)
    dx = float(np.linalg.norm(xa.T @ xa, "fro"))
    dy = float(np.linalg.norm(ya.T @ ya, "fro"))
    if dx == 0.0 or dy == 0.0:
        raise DegenerateInput("all-zero feature matrix")
    return _result_dtype(x, y)(num / (dx * dy))


def ka_gram(x, y, centered: bool = False):
    """Gram-space evaluation via the n x n matrices X X^T and Y Y^T."""
    xa, ya = _prepare(x, y, centered)
    gx = xa @ xa.T
    gy = ya @ ya.T
    num = float(np.sum(gx * gy))
    dx = float(np.linalg.norm(gx, "fro"))
    dy = float(np.linalg.norm(gy, "fro"))
    if dx == 0.0 or dy == 0.0:
        raise DegenerateInput("all-zero feature matrix")
    return _result_dtype(x, y)(num / (dx * dy))


def ka(x, y, centered: bool = False):
    """Alignment index; routes to the cheaper of the two evaluation forms."""
    xa, ya = _prepare(x, y, centered)
    n = xa.shape[0]
    if n * n < xa.shape[1] * ya.shape[1]:
        value = ka_gram(xa, ya)
    else:
        value = ka_naive(xa, ya)
    return _result_dtype(x, y)(value)


def ka_grad(x, y, centered: bool = False):
    """Analytic gradient of KA w.r.t. both inputs.

    dKA/dX = 2/(||X^T X||_F ||Y^T Y||_F) * (Y Y^T X)
             - KA(X, Y) * 2/||X^T X||_F^2 * (X X^T X)

    and symmetrically for Y.  Returned in the inputs' own dtypes.
    Centering, when requested, is itself linear, so its transpose (which is
    centering again) is applied to the chain.
    """
    x_in = x.data if isinstance(x, FeatureMatrix) else np.asarray(x)
    y_in = y.data if isinstance(y, FeatureMatrix) else np.asarray(y)
    xa, ya = _prepare(x, y, centered)
    gx = xa @ xa.T
    gy = ya @ ya.T
    dx = float(np.linalg.norm(gx, "fro"))
    dy = float(np.linalg.norm(gy, "fro"))
    if dx == 0.0 or dy == 0.0:
        raise DegenerateInput("all-zero feature matrix")
    num = float(np.sum(gx * gy))
    value = num / (dx * dy)
    grad_x = (2.0 / (dx * dy)) * (gy @ xa) - (value * 2.0 / (dx * dx)) * (gx @ xa)
    grad_y = (2.0 / (dx * dy)) * (gx @ ya) - (value * 2.0 / (dy * dy)) * (gy @ ya)
    if centered:
        grad_x = _center(grad_x)
        grad_y = _center(grad_y)
    return grad_x.astype(x_in.dtype, copy=False), grad_y.astype(y_in.dtype, copy=False)
