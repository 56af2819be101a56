"""Mask-guided average pooling of a feature map into appearance queries."""
from __future__ import annotations

import numpy as np


def _check(f, m) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(f, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if f.ndim != 3:
        raise ValueError(f"feature map must be H x W x C, got shape {f.shape}")
    if m.shape != f.shape[:2]:
        raise ValueError(f"mask shape {m.shape} does not match feature map {f.shape[:2]}")
    if np.any(m < 0) or np.any(m > 1):
        raise ValueError("mask weights must lie in [0, 1]")
    return f, m


def masked_average_pool(f, m, binarize: bool = False) -> np.ndarray:
    """Weighted mean of the feature vectors under a (soft) mask.

    An empty mask pools to the zero vector.
    """
    f, m = _check(f, m)
    if binarize:
        m = (m >= 0.5).astype(np.float64)
    total = m.sum()
    if total == 0:
        return np.zeros(f.shape[2])
    return np.tensordot(m, f, axes=([0, 1], [0, 1])) / total


def pool_all_instances(f, masks, binarize: bool = False) -> np.ndarray:
    """Stack of pooled vectors, one row per mask (N x C)."""
    f = np.asarray(f, dtype=np.float64)
    masks = list(masks)
    if not masks:
        raise ValueError("need at least one mask")
    return np.stack([masked_average_pool(f, m, binarize=binarize) for m in masks])
