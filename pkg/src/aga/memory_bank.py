"""Sliding-window memory of track-aligned embeddings.

Reading weights the record of age ``w`` (newest is 1) by its per-slot
confidence times ``W / w``. The result is left unnormalized; cosine
similarity downstream is scale-invariant.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .similarity import as_embeddings


@dataclass(frozen=True)
class MemoryRecord:
    e_obj: np.ndarray
    e_app: np.ndarray
    conf: np.ndarray


@dataclass(frozen=True)
class MemoryReadout:
    m_obj: np.ndarray
    m_app: np.ndarray


class MemoryBank:
    def __init__(self, window: int = 5):
        if int(window) < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.window = int(window)
        self.records: deque[MemoryRecord] = deque(maxlen=self.window)
        self.n: int | None = None
        self.dim: int | None = None

    def __len__(self) -> int:
        return len(self.records)

    def push(self, e_obj, e_app, conf) -> "MemoryBank":
        """Append one frame of slot-ordered embeddings; evicts the oldest past W."""
        e_obj = as_embeddings(e_obj, "e_obj").copy()
        e_app = as_embeddings(e_app, "e_app").copy()
        conf = np.asarray(conf, dtype=np.float64).copy()
        if e_obj.shape != e_app.shape:
            raise ValueError(f"object/appearance shapes differ: {e_obj.shape} vs {e_app.shape}")
        n, dim = e_obj.shape
        if conf.shape != (n,):
            raise ValueError(f"expected {n} confidences, got shape {conf.shape}")
        if np.any(conf < 0) or np.any(conf > 1) or not np.all(np.isfinite(conf)):
            raise ValueError("confidences must lie in [0, 1]")
        if self.n is None:
            self.n, self.dim = n, dim
        elif (n, dim) != (self.n, self.dim):
            raise ValueError(f"record shape {(n, dim)} does not match bank {(self.n, self.dim)}")
        self.records.append(MemoryRecord(e_obj, e_app, conf))
        return self

    def read_memory(self) -> MemoryReadout:
        if not self.records:
            raise ValueError("cannot read an empty memory bank")
        m_obj = np.zeros((self.n, self.dim))
        m_app = np.zeros((self.n, self.dim))
        for age, rec in enumerate(reversed(self.records), start=1):
            weight = rec.conf * (self.window / age)
            m_obj += rec.e_obj * weight[:, None]
            m_app += rec.e_app * weight[:, None]
        return MemoryReadout(m_obj, m_app)
