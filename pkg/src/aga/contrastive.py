"""Pairwise softmax contrastive loss with analytic gradients.

For a key ``v`` with positives ``k+`` and negatives ``k-``::

    L = log(1 + sum_{k-} sum_{k+} exp(v.k- - v.k+))

evaluated with log-sum-exp stabilization. A small gradient-descent refiner
applies the loss to free embedding vectors so its effect on cluster
separation can be measured without a network.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.metrics import silhouette_score

CONTRASTIVE_LOSS_WEIGHT = 2.0


@dataclass
class ContrastivePair:
    key: np.ndarray
    positives: np.ndarray  # P x C
    negatives: np.ndarray  # K x C, K may be 0

    def __post_init__(self):
        self.key = np.asarray(self.key, dtype=np.float64)
        if self.key.ndim != 1:
            raise ValueError("key must be a single vector")
        dim = self.key.shape[0]
        for name in ("positives", "negatives"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.size == 0:
                arr = arr.reshape(0, dim)
            if arr.ndim != 2 or arr.shape[1] != dim:
                raise ValueError(f"{name} must be rows of dim {dim}, got shape {arr.shape}")
            setattr(self, name, arr)
        if len(self.positives) < 1:
            raise ValueError("need at least one positive")


@dataclass
class LossReport:
    value: float
    grad_key: np.ndarray
    grad_positives: np.ndarray
    grad_negatives: np.ndarray


def contrastive_loss(p: ContrastivePair) -> LossReport:
    v, kp, kn = p.key, p.positives, p.negatives
    if len(kn) == 0:
        return LossReport(0.0, np.zeros_like(v), np.zeros_like(kp), np.zeros_like(kn))
    # z[n, q] = v.k-_n - v.k+_q
    z = (kn @ v)[:, None] - (kp @ v)[None, :]
    top = max(0.0, float(z.max()))
    ez = np.exp(z - top)
    denom = np.exp(-top) + ez.sum()
    if top == 0.0:
        value = float(np.log1p(np.exp(z).sum()))
    else:
        value = top + float(np.log(denom))
    w = ez / denom  # dL/dz
    grad_key = w.sum(axis=1) @ kn - w.sum(axis=0) @ kp
    grad_neg = w.sum(axis=1)[:, None] * v[None, :]
    grad_pos = -w.sum(axis=0)[:, None] * v[None, :]
    return LossReport(value, grad_key, grad_pos, grad_neg)


def gradient_check(p: ContrastivePair, eps: float = 1e-5) -> float:
    """Largest coordinate error between analytic and central-difference gradients.

    Per coordinate the error is ``|a - f| / max(|a|, |f|, 1)``: relative for
    gradients of magnitude >= 1, absolute below that.
    """
    if not 0 < eps <= 1e-3:
        raise ValueError("eps must lie in (0, 1e-3]")
    report = contrastive_loss(p)
    analytic = np.concatenate(
        [report.grad_key.ravel(), report.grad_positives.ravel(), report.grad_negatives.ravel()]
    )
    dim = p.key.shape[0]
    flat = np.concatenate([p.key, p.positives.ravel(), p.negatives.ravel()])
    n_pos = len(p.positives)

    def loss_at(x: np.ndarray) -> float:
        key = x[:dim]
        pos = x[dim : dim + n_pos * dim].reshape(n_pos, dim)
        neg = x[dim + n_pos * dim :].reshape(-1, dim)
        return contrastive_loss(ContrastivePair(key, pos, neg)).value

    numeric = np.empty_like(flat)
    for i in range(flat.size):
        x = flat.copy()
        x[i] += eps
        hi = loss_at(x)
        x[i] -= 2 * eps
        lo = loss_at(x)
        numeric[i] = (hi - lo) / (2 * eps)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return float(np.max(np.abs(analytic - numeric) / denom))


def mean_contrastive_loss(
    x: np.ndarray,
    labels: np.ndarray,
    num_refs: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, np.ndarray]:
    """Mean loss over every sample used as key, with the gradient wrt ``x``.

    ``num_refs`` limits how many same-identity references each key sees
    (all of them when None).
    """
    grad = np.zeros_like(x)
    total = 0.0
    for i in range(len(x)):
        same = np.flatnonzero((labels == labels[i]) & (np.arange(len(x)) != i))
        other = np.flatnonzero(labels != labels[i])
        if num_refs is not None and len(same) > num_refs:
            same = np.sort(rng.choice(same, size=num_refs, replace=False))
        rep = contrastive_loss(ContrastivePair(x[i], x[same], x[other]))
        total += rep.value
        grad[i] += rep.grad_key
        grad[same] += rep.grad_positives
        grad[other] += rep.grad_negatives
    return total / len(x), grad / len(x)


@dataclass
class RefineResult:
    embeddings: np.ndarray
    silhouette_before: float
    silhouette_after: float
    losses: list[float]


def refine_embeddings(
    embeddings,
    labels,
    steps: int = 100,
    lr: float = 0.05,
    num_refs: Optional[int] = None,
    loss_weight: float = CONTRASTIVE_LOSS_WEIGHT,
    seed: int = 0,
) -> RefineResult:
    """Gradient descent on the mean contrastive loss; reports cosine silhouettes."""
    x = np.array(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or len(x) != len(labels):
        raise ValueError("embeddings must be M x C with one label per row")
    ids, counts = np.unique(labels, return_counts=True)
    if len(ids) < 2:
        raise ValueError("need at least two identities")
    if counts.min() < 2:
        raise ValueError("every identity needs at least two samples")
    rng = np.random.default_rng(seed)
    before = float(silhouette_score(x, labels, metric="cosine"))
    losses = []
    for _ in range(steps):
        value, grad = mean_contrastive_loss(x, labels, num_refs, rng)
        losses.append(value)
        if lr != 0:
            x -= lr * loss_weight * grad
    after = float(silhouette_score(x, labels, metric="cosine"))
    return RefineResult(x, before, after, losses)
