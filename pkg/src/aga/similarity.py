"""Cosine similarity between embedding sets and weighted score fusion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FusionWeights:
    lambda_obj: float = 1.0
    lambda_app: float = 1.0

    def __post_init__(self):
        if self.lambda_obj < 0 or self.lambda_app < 0:
            raise ValueError("fusion weights must be non-negative")
        if self.lambda_obj == 0 and self.lambda_app == 0:
            raise ValueError("fusion weights cannot both be zero")


OBJECT_ONLY = FusionWeights(1.0, 0.0)


def as_embeddings(x, name: str = "embeddings") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty N x C matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def cosine_similarity_matrix(a, b) -> np.ndarray:
    """Pairwise cosine similarity; rows of ``a`` against rows of ``b``.

    A zero-norm vector has similarity 0 with everything.
    """
    a = as_embeddings(a, "a")
    b = as_embeddings(b, "b")
    if a.shape != b.shape:
        raise ValueError(f"embedding shapes differ: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = np.outer(na, nb)
    dots = a @ b.T
    out = np.zeros_like(dots)
    ok = denom > 0
    out[ok] = dots[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)


def fuse_scores(s_obj, s_app, w: FusionWeights = FusionWeights()) -> np.ndarray:
    s_obj = np.asarray(s_obj, dtype=np.float64)
    s_app = np.asarray(s_app, dtype=np.float64)
    if s_obj.shape != s_app.shape:
        raise ValueError(f"score shapes differ: {s_obj.shape} vs {s_app.shape}")
    return w.lambda_obj * s_obj + w.lambda_app * s_app
