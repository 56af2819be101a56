"""Appearance-guided association for query-based video instance segmentation."""
from .assignment import AssignmentResult, brute_force_assignment, solve_assignment
from .memory_bank import MemoryBank, MemoryReadout
from .similarity import FusionWeights, cosine_similarity_matrix, fuse_scores
from .tracker import FrameDetections, Tracker, TrackerConfig, TrackOutput, track_video, track_video_object_only

__all__ = [
    "AssignmentResult",
    "FrameDetections",
    "FusionWeights",
    "MemoryBank",
    "MemoryReadout",
    "TrackOutput",
    "Tracker",
    "TrackerConfig",
    "brute_force_assignment",
    "cosine_similarity_matrix",
    "fuse_scores",
    "solve_assignment",
    "track_video",
    "track_video_object_only",
]
