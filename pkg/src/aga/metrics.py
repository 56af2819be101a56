"""Identity-switch counting, association accuracy and video-level mask AP.

Association metrics work on a ``slot_ids`` matrix: ``slot_ids[t, k]`` is the
ground-truth id occupying predicted slot ``k`` at frame ``t`` (-1 when the
slot cannot be identified). Identity anchoring happens at the first frame.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .assignment import solve_assignment

AP_THRESHOLDS = tuple(np.round(np.arange(0.50, 0.951, 0.05), 2).tolist())


def _as_slot_ids(slot_ids) -> np.ndarray:
    arr = np.asarray(slot_ids)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"slot_ids must be a non-empty T x N matrix, got shape {arr.shape}")
    return arr.astype(np.int64)


def gt_slot_tracks(slot_ids, gt_ids: Optional[Sequence[int]] = None) -> dict[int, np.ndarray]:
    """For each GT id, the slot holding it at every frame (-1 if none)."""
    arr = _as_slot_ids(slot_ids)
    if gt_ids is None:
        gt_ids = sorted(int(g) for g in np.unique(arr) if g >= 0)
    tracks = {}
    for g in gt_ids:
        hit = arr == g
        if np.any(hit.sum(axis=1) > 1):
            raise ValueError(f"GT id {g} occupies more than one slot in a frame")
        slots = np.where(hit.any(axis=1), hit.argmax(axis=1), -1)
        tracks[int(g)] = slots
    return tracks


def count_id_switches(slot_ids, gt_ids: Optional[Sequence[int]] = None) -> int:
    """+1 each time a GT instance's slot differs from its slot in the previous
    identified frame. Frames where the instance is unidentified are skipped."""
    total = 0
    for slots in gt_slot_tracks(slot_ids, gt_ids).values():
        prev = None
        for s in slots:
            if s < 0:
                continue
            if prev is not None and s != prev:
                total += 1
            prev = s
    return total


def association_accuracy(slot_ids, gt_ids: Optional[Sequence[int]] = None) -> float:
    """Fraction of post-anchor (frame, instance) pairs still in their anchor slot.

    Videos with a single frame or no anchored instance score 1.0.
    """
    arr = _as_slot_ids(slot_ids)
    correct = 0
    total = 0
    for slots in gt_slot_tracks(arr, gt_ids).values():
        anchor = slots[0]
        if anchor < 0:
            continue
        rest = slots[1:]
        correct += int(np.sum(rest == anchor))
        total += rest.size
    return 1.0 if total == 0 else correct / total


# -- mask-level identity -------------------------------------------------------


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    union = np.logical_or(a, b).sum()
    return float(np.logical_and(a, b).sum() / union) if union else 0.0


def slot_ids_from_masks(pred_masks, gt_masks) -> np.ndarray:
    """Identify slots per frame by maximum-IoU matching; zero-IoU pairs stay -1."""
    pred_masks = np.asarray(pred_masks, dtype=bool)
    gt_masks = np.asarray(gt_masks, dtype=bool)
    T, N = pred_masks.shape[:2]
    M = gt_masks.shape[1]
    if gt_masks.shape[0] != T or pred_masks.shape[2:] != gt_masks.shape[2:]:
        raise ValueError("prediction and GT mask tubes disagree in shape")
    size = max(N, M)
    out = np.full((T, N), -1, dtype=np.int64)
    for t in range(T):
        iou = np.zeros((size, size))
        for k in range(N):
            for g in range(M):
                iou[k, g] = mask_iou(pred_masks[t, k], gt_masks[t, g])
        perm = solve_assignment(iou).permutation
        for k in range(N):
            g = perm[k]
            if g < M and iou[k, g] > 0:
                out[t, k] = g
    return out


# -- spatio-temporal AP --------------------------------------------------------


def tube_iou(pred_tube: np.ndarray, gt_tube: np.ndarray) -> float:
    """Video-level IoU: intersections and unions summed over all frames."""
    inter = np.logical_and(pred_tube, gt_tube).sum()
    union = np.logical_or(pred_tube, gt_tube).sum()
    return float(inter / union) if union else 0.0


def _average_precision(tp: np.ndarray, n_gt: int) -> float:
    """All-point interpolated area under the precision/recall curve."""
    if n_gt == 0 or tp.size == 0:
        return 0.0
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, tp.size + 1)
    recall = ctp / n_gt
    # precision envelope: best precision at any recall >= r
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate(([0.0], recall[:-1]))
    return float(np.sum((recall - prev_recall) * envelope))


def spatiotemporal_ap(
    pred_masks,
    pred_scores,
    gt_masks,
    thresholds: Sequence[float] = AP_THRESHOLDS,
) -> dict:
    """Video-level mask AP in percent.

    ``pred_masks`` is T x N x H x W (one tube per slot), ``pred_scores`` one
    score per tube, ``gt_masks`` T x M x H x W. GT tubes with no pixels in
    any frame are ignored. Predictions are matched greedily in descending
    score order (ties by slot index) to the unmatched GT tube of highest IoU.
    """
    if pred_masks is None or gt_masks is None:
        raise ValueError("spatio-temporal AP needs masks on both sides")
    pred_masks = np.asarray(pred_masks, dtype=bool)
    gt_masks = np.asarray(gt_masks, dtype=bool)
    scores = np.asarray(pred_scores, dtype=np.float64)
    if pred_masks.ndim != 4 or gt_masks.ndim != 4:
        raise ValueError("mask tubes must be T x N x H x W")
    if pred_masks.shape[0] != gt_masks.shape[0] or pred_masks.shape[2:] != gt_masks.shape[2:]:
        raise ValueError("prediction and GT mask tubes disagree in shape")
    if scores.shape != (pred_masks.shape[1],):
        raise ValueError("need one score per predicted tube")
    keep = [g for g in range(gt_masks.shape[1]) if gt_masks[:, g].any()]
    gts = [gt_masks[:, g] for g in keep]
    n_pred = pred_masks.shape[1]
    ious = np.array(
        [[tube_iou(pred_masks[:, k], gt) for gt in gts] for k in range(n_pred)]
    ).reshape(n_pred, len(gts))
    ranked = sorted(range(n_pred), key=lambda k: (-scores[k], k))

    per_threshold = {}
    for thr in thresholds:
        matched = set()
        tp = np.zeros(n_pred)
        for rank, k in enumerate(ranked):
            best, best_iou = None, -1.0
            for g in range(len(gts)):
                if g not in matched and ious[k, g] >= thr and ious[k, g] > best_iou:
                    best, best_iou = g, ious[k, g]
            if best is not None:
                matched.add(best)
                tp[rank] = 1.0
        per_threshold[float(thr)] = 100.0 * _average_precision(tp, len(gts))
    out = {"ap": float(np.mean(list(per_threshold.values()))), "per_threshold": per_threshold}
    out["ap50"] = per_threshold.get(0.5)
    out["ap75"] = per_threshold.get(0.75)
    return out
