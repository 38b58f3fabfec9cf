"""Dense tensor primitives.

Tensors are numpy arrays of complex128 in row-major (C) order.  All public
operations validate their arguments, return fresh arrays and guarantee finite
entries, so the rest of the library never has to re-check.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

__all__ = [
    "as_tensor",
    "contract_pair",
    "permute",
    "factorize",
    "scale",
    "tensor_norm",
]

DTYPE = np.complex128


def as_tensor(data, dims: Sequence[int] | None = None) -> np.ndarray:
    """Coerce `data` to a C-contiguous complex128 array, optionally reshaped."""
    t = np.ascontiguousarray(data, dtype=DTYPE)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise ValueError(f"dimensions must be positive, got {dims}")
        if t.size != int(np.prod(dims)):
            raise ValueError(f"cannot view {t.size} entries as shape {dims}")
        t = t.reshape(dims)
    _check_finite(t)
    return t


def _check_finite(t: np.ndarray) -> None:
    if not np.isfinite(t).all():
        raise FloatingPointError("tensor contains non-finite entries")


def _check_axes(t: np.ndarray, axes: Sequence[int]) -> tuple[int, ...]:
    axes = tuple(int(a) for a in axes)
    for a in axes:
        if not 0 <= a < t.ndim:
            raise ValueError(f"axis {a} out of range for rank-{t.ndim} tensor")
    if len(set(axes)) != len(axes):
        raise ValueError(f"repeated axis in {axes}")
    return axes


def permute(t: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder axes; `order` must be a permutation of range(ndim)."""
    order = _check_axes(t, order)
    if len(order) != t.ndim:
        raise ValueError(f"permutation {order} does not cover all {t.ndim} axes")
    return np.ascontiguousarray(np.transpose(t, order))


def contract_pair(
    a: np.ndarray,
    axes_a: Sequence[int],
    b: np.ndarray,
    axes_b: Sequence[int],
) -> np.ndarray:
    """Contract matching axes of two tensors.

    Both tensors are permuted so the contracted axes sit innermost, reshaped
    to matrices and multiplied; the result keeps the free axes of `a` followed
    by the free axes of `b`, each in original relative order.
    """
    axes_a = _check_axes(a, axes_a)
    axes_b = _check_axes(b, axes_b)
    if len(axes_a) != len(axes_b):
        raise ValueError("axis lists differ in length")
    for ia, ib in zip(axes_a, axes_b):
        if a.shape[ia] != b.shape[ib]:
            raise ValueError(
                f"dimension mismatch: axis {ia} ({a.shape[ia]}) vs "
                f"axis {ib} ({b.shape[ib]})"
            )
    free_a = [i for i in range(a.ndim) if i not in axes_a]
    free_b = [i for i in range(b.ndim) if i not in axes_b]
    da = int(np.prod([a.shape[i] for i in free_a], initial=1))
    db = int(np.prod([b.shape[i] for i in free_b], initial=1))
    dk = int(np.prod([a.shape[i] for i in axes_a], initial=1))
    am = np.transpose(a, free_a + list(axes_a)).reshape(da, dk)
    bm = np.transpose(b, list(axes_b) + free_b).reshape(dk, db)
    out = (am @ bm).reshape(
        [a.shape[i] for i in free_a] + [b.shape[i] for i in free_b]
    )
    _check_finite(out)
    return out


def factorize(
    t: np.ndarray,
    left_axes: Sequence[int],
    max_rank: int | None = None,
    cutoff: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Split a tensor across a bipartition of its axes by SVD.

    Returns (left, right, discarded_weight) with the square roots of the
    singular values absorbed symmetrically into both factors.  The new bond is
    the last axis of `left` and the first of `right`.  `discarded_weight` is
    the dropped fraction of the squared Frobenius norm.
    """
    if cutoff < 0:
        raise ValueError(f"cutoff must be non-negative, got {cutoff}")
    left_axes = _check_axes(t, left_axes)
    if not left_axes or len(left_axes) == t.ndim:
        raise ValueError("left_axes must be a nonempty proper subset of the axes")
    right_axes = [i for i in range(t.ndim) if i not in left_axes]
    ldims = [t.shape[i] for i in left_axes]
    rdims = [t.shape[i] for i in right_axes]
    mat = np.transpose(t, list(left_axes) + right_axes).reshape(
        int(np.prod(ldims)), int(np.prod(rdims))
    )
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    total = float(np.sum(s**2))
    if total == 0.0:
        keep = 1
    else:
        # Keep the smallest rank whose discarded squared weight is <= cutoff.
        tail = np.cumsum(s[::-1] ** 2)[::-1] / total
        keep = int(np.sum(tail > cutoff))
        keep = max(keep, 1)
    if max_rank is not None:
        if max_rank < 1:
            raise ValueError(f"max_rank must be >= 1, got {max_rank}")
        keep = min(keep, max_rank)
    discarded = float(np.sum(s[keep:] ** 2) / total) if total > 0 else 0.0
    root = np.sqrt(s[:keep])
    left = (u[:, :keep] * root).reshape(ldims + [keep])
    right = (root[:, None] * vh[:keep]).reshape([keep] + rdims)
    _check_finite(left)
    _check_finite(right)
    return left, right, discarded


def scale(t: np.ndarray, c: complex) -> np.ndarray:
    """Multiply by a scalar."""
    out = np.asarray(t, dtype=DTYPE) * DTYPE(c)
    _check_finite(out)
    return out


def tensor_norm(t: np.ndarray) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(t).ravel()))
