"""Online appearance-guided association over a fixed set of N query slots.

Per frame: read the memory of earlier frames, score current detections
against it with fused cosine similarity, solve the assignment, emit the
detections in slot order and push the slot-aligned embeddings.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .assignment import solve_assignment
from .memory_bank import MemoryBank
from .similarity import OBJECT_ONLY, FusionWeights, cosine_similarity_matrix, fuse_scores


@dataclass
class FrameDetections:
    frame_index: int
    e_obj: np.ndarray
    e_app: np.ndarray
    conf: np.ndarray
    class_ids: Optional[np.ndarray] = None
    masks: Optional[np.ndarray] = None  # N x H x W, binary
    hidden_ids: Optional[np.ndarray] = None  # ground-truth ids; evaluation only

    def __post_init__(self):
        self.e_obj = np.asarray(self.e_obj, dtype=np.float64)
        self.e_app = np.asarray(self.e_app, dtype=np.float64)
        self.conf = np.asarray(self.conf, dtype=np.float64)
        if self.e_obj.ndim != 2 or self.e_obj.shape != self.e_app.shape:
            raise ValueError("object and appearance embeddings must share an N x C shape")
        n = self.e_obj.shape[0]
        if self.conf.shape != (n,):
            raise ValueError(f"expected {n} confidences, got {self.conf.shape}")
        for name in ("class_ids", "masks", "hidden_ids"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val)
                if len(val) != n:
                    raise ValueError(f"{name} has {len(val)} entries, expected {n}")
                setattr(self, name, val)

    @property
    def n(self) -> int:
        return self.e_obj.shape[0]

    def take(self, order: Sequence[int]) -> "FrameDetections":
        """Detections gathered into slot order: slot k holds detection ``order[k]``."""
        order = np.asarray(order, dtype=np.intp)
        pick = lambda x: None if x is None else x[order]  # noqa: E731
        return FrameDetections(
            frame_index=self.frame_index,
            e_obj=self.e_obj[order],
            e_app=self.e_app[order],
            conf=self.conf[order],
            class_ids=pick(self.class_ids),
            masks=pick(self.masks),
            hidden_ids=pick(self.hidden_ids),
        )


@dataclass(frozen=True)
class TrackerConfig:
    window: int = 5
    fusion: FusionWeights = FusionWeights()
    use_memory: bool = True
    # replay the printed listing order (push/emit before assignment, one-frame lag)
    alg1_literal_order: bool = False

    def __post_init__(self):
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")

    @property
    def effective_window(self) -> int:
        return self.window if self.use_memory else 1


@dataclass
class TrackOutput:
    orders: list[tuple[int, ...]] = field(default_factory=list)  # slot -> detection
    predictions: list[FrameDetections] = field(default_factory=list)
    scores: list[Optional[np.ndarray]] = field(default_factory=list)

    @property
    def idx(self) -> list[tuple[int, ...]]:
        """Per-frame detection -> slot permutations."""
        out = []
        for order in self.orders:
            perm = [0] * len(order)
            for slot, det in enumerate(order):
                perm[det] = slot
            out.append(tuple(perm))
        return out

    def slot_ids(self) -> np.ndarray:
        """T x N array of the hidden ground-truth id sitting in each slot."""
        if any(p.hidden_ids is None for p in self.predictions):
            raise ValueError("predictions carry no hidden ids")
        return np.stack([np.asarray(p.hidden_ids) for p in self.predictions])


class Tracker:
    """Stateful online tracker for one video."""

    def __init__(self, cfg: TrackerConfig = TrackerConfig(), memory_scale: float = 1.0):
        self.cfg = cfg
        self.bank = MemoryBank(cfg.effective_window)
        # scales every memory readout; assignments must not depend on it
        self.memory_scale = memory_scale
        self.n: Optional[int] = None
        self.last_frame: Optional[int] = None
        self._pending_order: Optional[tuple[int, ...]] = None

    def _score(self, det: FrameDetections) -> np.ndarray:
        mem = self.bank.read_memory()
        s_obj = cosine_similarity_matrix(det.e_obj, mem.m_obj * self.memory_scale)
        s_app = cosine_similarity_matrix(det.e_app, mem.m_app * self.memory_scale)
        return fuse_scores(s_obj, s_app, self.cfg.fusion)

    def _push(self, aligned: FrameDetections) -> None:
        self.bank.push(aligned.e_obj, aligned.e_app, aligned.conf)

    def step(self, det: FrameDetections):
        """Process one frame; returns (slot order, slot-ordered detections, scores)."""
        if self.n is None:
            self.n = det.n
        elif det.n != self.n:
            raise ValueError(f"frame {det.frame_index} has {det.n} detections, expected {self.n}")
        if self.last_frame is not None and det.frame_index <= self.last_frame:
            raise ValueError("frame indices must be strictly increasing")
        self.last_frame = det.frame_index

        if self.cfg.alg1_literal_order:
            return self._step_literal(det)

        if len(self.bank) == 0:
            order = tuple(range(det.n))
            scores = None
        else:
            scores = self._score(det)
            order = solve_assignment(scores).inverse()
        aligned = det.take(order)
        self._push(aligned)
        return order, aligned, scores

    def _step_literal(self, det: FrameDetections):
        order = self._pending_order or tuple(range(det.n))
        aligned = det.take(order)
        self._push(aligned)
        scores = self._score(det)
        self._pending_order = solve_assignment(scores).inverse()
        return order, aligned, scores


def track_video(
    frames: Sequence[FrameDetections],
    cfg: TrackerConfig = TrackerConfig(),
    *,
    memory_scale: float = 1.0,
) -> TrackOutput:
    if len(frames) == 0:
        raise ValueError("cannot track an empty frame sequence")
    tracker = Tracker(cfg, memory_scale=memory_scale)
    out = TrackOutput()
    for det in frames:
        order, aligned, scores = tracker.step(det)
        out.orders.append(order)
        out.predictions.append(aligned)
        out.scores.append(scores)
    return out


def track_video_object_only(
    frames: Sequence[FrameDetections],
    cfg: TrackerConfig = TrackerConfig(),
    **kwargs,
) -> TrackOutput:
    return track_video(frames, replace(cfg, fusion=OBJECT_ONLY), **kwargs)
