"""Synthetic track/swap videos and a simulated query-based detector.

Instances are ellipses moving along cubic Bezier curves with a fixed depth
order. In swap videos a chosen pair exchanges position streams at
``swap_frame``. The detector simulator turns ground truth into per-frame
object embeddings (mostly positional) and appearance embeddings (latent
appearance scaled by visibility), emitted in a shuffled order.

Frame positions inside a video are 0-based; files number frames from 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dataset_io import FORMAT_VERSION, FormatError, rle_decode, rle_encode
from .tracker import FrameDetections

RESOLUTION_CHOICES = (600, 700, 800, 900)
KINDS = ("track", "swap")
SWAP_MODES = ("permanent", "momentary")


@dataclass(frozen=True)
class BezierTrajectory:
    control_points: np.ndarray  # 4 x 2, normalized scene coordinates
    duration: int

    def __post_init__(self):
        cp = np.asarray(self.control_points, dtype=np.float64)
        if cp.shape != (4, 2):
            raise ValueError(f"cubic Bezier needs 4 control points, got shape {cp.shape}")
        object.__setattr__(self, "control_points", cp)


def eval_bezier(b: BezierTrajectory, t: float) -> np.ndarray:
    """De Casteljau evaluation of the cubic at ``t`` in [0, 1]."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    pts = b.control_points.copy()
    while len(pts) > 1:
        pts = (1.0 - t) * pts[:-1] + t * pts[1:]
    return pts[0]


@dataclass
class InstanceSpec:
    id: int
    class_id: int
    axes: tuple[float, float]  # ellipse semi-axes in nominal pixels
    depth_rank: int  # smaller is nearer
    latent_appearance: np.ndarray
    trajectory: BezierTrajectory


@dataclass
class ScenarioParams:
    frames: int = 36
    instance_counts: tuple[int, ...] = (2, 3)
    resolutions: tuple[int, ...] = RESOLUTION_CHOICES
    axis_range: tuple[float, float] = (0.06, 0.16)  # fraction of min(w, h)
    margin: float = 0.2  # allowed excursion outside the frame, per side
    embed_dim: int = 32
    num_classes: int = 21
    raster_scale: float = 0.25
    swap_mode: str = "permanent"
    # normalized distance the swapped pair must be apart at the swap frame
    swap_min_separation: float = 0.25
    swap_max_tries: int = 64

    def validate(self, kind: str) -> None:
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        if self.frames < 2:
            raise ValueError("need at least 2 frames")
        if not self.instance_counts or any(c not in (2, 3) for c in self.instance_counts):
            raise ValueError("instance counts must be drawn from {2, 3}")
        if kind == "swap" and self.frames < 4:
            raise ValueError("swap videos need at least 4 frames")
        if self.swap_mode not in SWAP_MODES:
            raise ValueError(f"swap_mode must be one of {SWAP_MODES}")
        if not 0 < self.raster_scale <= 1:
            raise ValueError("raster_scale must lie in (0, 1]")
        if self.embed_dim < 4:
            raise ValueError("embed_dim must be >= 4")
        lo, hi = self.axis_range
        if not 0 < lo <= hi:
            raise ValueError("invalid axis range")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")


@dataclass
class Scenario:
    video_id: str
    kind: str
    frames: int
    resolution: tuple[int, int]  # (width, height)
    instances: list[InstanceSpec]
    seed: int
    swap_frame: Optional[int] = None
    swap_pair: Optional[tuple[int, int]] = None
    swap_mode: str = "permanent"
    raster_scale: float = 0.25

    @property
    def mask_shape(self) -> tuple[int, int]:
        w, h = self.resolution
        return (max(1, round(h * self.raster_scale)), max(1, round(w * self.raster_scale)))


@dataclass
class GroundTruth:
    centers: np.ndarray  # T x n x 2, nominal pixels
    visibility: np.ndarray  # T x n
    masks: np.ndarray  # T x n x H x W, visible (depth-resolved)
    amodal: np.ndarray  # T x n x H x W, unoccluded footprint inside the frame

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.centers.shape[1])


# -- generation ----------------------------------------------------------------


def position_streams(sc: Scenario) -> np.ndarray:
    """T x n x 2 normalized positions, with the swap applied."""
    T = sc.frames
    pos = np.empty((T, len(sc.instances), 2))
    for k, inst in enumerate(sc.instances):
        for t in range(T):
            pos[t, k] = eval_bezier(inst.trajectory, t / (T - 1))
    if sc.kind == "swap":
        i, j = sc.swap_pair
        if sc.swap_mode == "permanent":
            span = slice(sc.swap_frame, T)
        else:
            span = slice(sc.swap_frame, sc.swap_frame + 1)
        pos[span, [i, j]] = pos[span, [j, i]]
    return pos


def _ellipse(shape, scale, center, axes) -> np.ndarray:
    H, W = shape
    ys = (np.arange(H) + 0.5) / scale
    xs = (np.arange(W) + 0.5) / scale
    dx = (xs[None, :] - center[0]) / axes[0]
    dy = (ys[:, None] - center[1]) / axes[1]
    return dx * dx + dy * dy <= 1.0


def render_ground_truth(sc: Scenario) -> GroundTruth:
    w, h = sc.resolution
    pos = position_streams(sc)
    centers = pos * np.array([w, h], dtype=np.float64)
    T, n = pos.shape[:2]
    H, W = sc.mask_shape
    amodal = np.zeros((T, n, H, W), dtype=bool)
    masks = np.zeros_like(amodal)
    vis = np.zeros((T, n))
    depth_order = sorted(range(n), key=lambda k: sc.instances[k].depth_rank)
    for t in range(T):
        covered = np.zeros((H, W), dtype=bool)
        for k in depth_order:
            inst = sc.instances[k]
            full = _ellipse((H, W), sc.raster_scale, centers[t, k], inst.axes)
            amodal[t, k] = full
            masks[t, k] = full & ~covered
            covered |= full
            area = full.sum()
            vis[t, k] = masks[t, k].sum() / area if area else 0.0
    return GroundTruth(centers, vis, masks, amodal)


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def sample_scenario(seed: int, kind: str, params: ScenarioParams = ScenarioParams(), video_id: str = "") -> Scenario:
    params.validate(kind)
    geom_seq, swap_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(geom_seq)
    n = int(rng.choice(params.instance_counts))
    w = int(rng.choice(params.resolutions))
    h = int(rng.choice(params.resolutions))
    depth = rng.permutation(n)
    lo, hi = params.axis_range
    instances = []
    for k in range(n):
        # convex hull of the control points bounds the curve
        cp = rng.uniform(-params.margin, 1.0 + params.margin, size=(4, 2))
        axes = tuple(float(a) for a in rng.uniform(lo, hi, size=2) * min(w, h))
        instances.append(
            InstanceSpec(
                id=k,
                class_id=int(rng.integers(params.num_classes)),
                axes=axes,
                depth_rank=int(depth[k]),
                latent_appearance=_unit(rng, params.embed_dim),
                trajectory=BezierTrajectory(cp, params.frames),
            )
        )
    is_swap = kind == "swap"
    swap_frame, pair = None, None
    if is_swap:
        swap_frame, pair = _sample_swap(np.random.default_rng(swap_seq), instances, params)
    return Scenario(
        video_id=video_id or f"{kind}_{seed}",
        kind=kind,
        frames=params.frames,
        resolution=(w, h),
        instances=instances,
        seed=int(seed),
        swap_frame=swap_frame if is_swap else None,
        swap_pair=pair if is_swap else None,
        swap_mode=params.swap_mode,
        raster_scale=params.raster_scale,
    )


def _sample_swap(rng: np.random.Generator, instances: list[InstanceSpec], params: ScenarioParams):
    """Draw (swap_frame, pair); a pair closer than the minimum separation is
    redrawn, keeping the most separated candidate if every try falls short."""
    T = params.frames
    best = None
    for _ in range(params.swap_max_tries):
        frame = int(rng.integers(2, T - 1))
        i, j = sorted(int(k) for k in rng.choice(len(instances), size=2, replace=False))
        tau = frame / (T - 1)
        gap = float(
            np.linalg.norm(
                eval_bezier(instances[i].trajectory, tau) - eval_bezier(instances[j].trajectory, tau)
            )
        )
        if best is None or gap > best[0]:
            best = (gap, frame, (i, j))
        if gap >= params.swap_min_separation:
            break
    return best[1], best[2]


def generate_scenario(
    seed: int, kind: str, params: ScenarioParams = ScenarioParams(), video_id: str = ""
) -> tuple[Scenario, GroundTruth]:
    sc = sample_scenario(seed, kind, params, video_id)
    return sc, render_ground_truth(sc)


# -- simulated detector ----------------------------------------------------------


@dataclass
class SimulatorParams:
    alpha_loc: float = 0.8
    obj_noise: float = 0.05
    app_noise: float = 0.1
    conf_noise: float = 0.05
    dropout_rate: float = 0.0  # fraction of frames with confidence 0 and noise appearance
    # geometric ladder of positional-encoding frequencies (cycles per frame span)
    pe_min_freq: float = 0.25
    pe_max_freq: float = 1.0
    pe_dc_weight: float = 0.3
    include_masks: bool = True
    seed: int = 0

    def validate(self) -> None:
        for name in ("alpha_loc", "dropout_rate", "pe_dc_weight"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        for name in ("obj_noise", "app_noise", "conf_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 < self.pe_min_freq <= self.pe_max_freq:
            raise ValueError("invalid positional-encoding frequency range")


def positional_encoding(
    xy, dim: int, min_freq: float = 0.25, max_freq: float = 1.0, dc_weight: float = 0.0
) -> np.ndarray:
    """Unit-norm sinusoidal encoding of a normalized 2-D position.

    ``dc_weight`` is the share of the squared norm carried by the
    zero-frequency component, which floors the cosine between any two
    encodings at roughly ``2 * dc_weight - 1``.
    """
    nf = (dim - 1) // 4
    freqs = np.geomspace(min_freq, max_freq, nf) * 2.0 * np.pi
    x, y = float(xy[0]), float(xy[1])
    waves = np.concatenate(
        [np.sin(freqs * x), np.cos(freqs * x), np.sin(freqs * y), np.cos(freqs * y)]
    )
    out = np.zeros(dim)
    out[0] = np.sqrt(dc_weight)
    out[1 : 1 + waves.size] = waves * np.sqrt((1.0 - dc_weight) / (2.0 * nf))
    return out


def _normalize(v: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(v)
    return v / norm if norm > 0 else v


def simulate_detections(sc: Scenario, gt: GroundTruth, sim: SimulatorParams = SimulatorParams()) -> list[FrameDetections]:
    sim.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(sim.seed), int(sc.seed)]))
    n = len(sc.instances)
    dim = sc.instances[0].latent_appearance.shape[0]
    w, h = sc.resolution
    # noise sigmas are expected norms of the isotropic noise vector
    coord_scale = 1.0 / np.sqrt(dim)
    frames = []
    for t in range(sc.frames):
        order = rng.permutation(n)
        dropped = rng.random() < sim.dropout_rate
        e_obj = np.empty((n, dim))
        e_app = np.empty((n, dim))
        conf = np.empty(n)
        for slot, k in enumerate(order):
            inst = sc.instances[k]
            xy = gt.centers[t, k] / np.array([w, h])
            phi = positional_encoding(xy, dim, sim.pe_min_freq, sim.pe_max_freq, sim.pe_dc_weight)
            obj = sim.alpha_loc * phi + (1.0 - sim.alpha_loc) * inst.latent_appearance
            e_obj[slot] = _normalize(obj + rng.normal(scale=sim.obj_noise * coord_scale, size=dim))
            visibility = 0.0 if dropped else gt.visibility[t, k]
            app_noise = rng.normal(scale=sim.app_noise * coord_scale, size=dim)
            e_app[slot] = _normalize(inst.latent_appearance * visibility + app_noise)
            c = visibility + rng.normal(scale=sim.conf_noise)
            conf[slot] = 0.0 if dropped else float(np.clip(c, 0.0, 1.0))
        frames.append(
            FrameDetections(
                frame_index=t + 1,
                e_obj=e_obj,
                e_app=e_app,
                conf=conf,
                class_ids=np.array([sc.instances[k].class_id for k in order]),
                masks=gt.masks[t, order] if sim.include_masks else None,
                hidden_ids=np.array([sc.instances[k].id for k in order]),
            )
        )
    return frames


# -- serialization hooks -----------------------------------------------------------


def scenario_header(sc: Scenario) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "type": "scenario",
        "video_id": sc.video_id,
        "kind": sc.kind,
        "frames": sc.frames,
        "resolution": list(sc.resolution),
        "seed": sc.seed,
        "swap_frame": sc.swap_frame,
        "swap_pair": list(sc.swap_pair) if sc.swap_pair is not None else None,
        "swap_mode": sc.swap_mode,
        "raster_scale": sc.raster_scale,
        "mask_shape": list(sc.mask_shape),
        "instances": [
            {
                "id": inst.id,
                "class_id": inst.class_id,
                "axes": list(inst.axes),
                "depth_rank": inst.depth_rank,
                "latent_appearance": inst.latent_appearance,
                "control_points": inst.trajectory.control_points,
            }
            for inst in sc.instances
        ],
    }


def frame_records(sc: Scenario, gt: GroundTruth, detections: Optional[Sequence[FrameDetections]] = None):
    for t in range(sc.frames):
        rec = {
            "frame_index": t + 1,
            "instances": [
                {
                    "id": k,
                    "center": gt.centers[t, k],
                    "visibility": gt.visibility[t, k],
                    "mask_rle": rle_encode(gt.masks[t, k]),
                    "amodal_rle": rle_encode(gt.amodal[t, k]),
                }
                for k in range(len(sc.instances))
            ],
        }
        if detections is not None:
            det = detections[t]
            rec["detections"] = [
                {
                    "hidden_id": det.hidden_ids[i],
                    "class_id": det.class_ids[i],
                    "confidence": det.conf[i],
                    "e_obj": det.e_obj[i],
                    "e_app": det.e_app[i],
                    "mask_rle": rle_encode(det.masks[i]) if det.masks is not None else None,
                }
                for i in range(det.n)
            ]
        yield rec


def scenario_from_records(header: dict, frames: list[dict]):
    T = header["frames"]
    instances = [
        InstanceSpec(
            id=int(d["id"]),
            class_id=int(d["class_id"]),
            axes=tuple(float(a) for a in d["axes"]),
            depth_rank=int(d["depth_rank"]),
            latent_appearance=np.array(d["latent_appearance"], dtype=np.float64),
            trajectory=BezierTrajectory(np.array(d["control_points"], dtype=np.float64), T),
        )
        for d in header["instances"]
    ]
    sc = Scenario(
        video_id=header["video_id"],
        kind=header["kind"],
        frames=T,
        resolution=tuple(header["resolution"]),
        instances=instances,
        seed=int(header["seed"]),
        swap_frame=header["swap_frame"],
        swap_pair=tuple(header["swap_pair"]) if header["swap_pair"] is not None else None,
        swap_mode=header["swap_mode"],
        raster_scale=float(header["raster_scale"]),
    )
    if list(sc.mask_shape) != list(header["mask_shape"]):
        raise FormatError("mask_shape does not match resolution and raster_scale", line=1)
    n = len(instances)
    H, W = sc.mask_shape
    centers = np.zeros((T, n, 2))
    vis = np.zeros((T, n))
    masks = np.zeros((T, n, H, W), dtype=bool)
    amodal = np.zeros_like(masks)
    detections = []
    for t, rec in enumerate(frames):
        for d in rec["instances"]:
            k = int(d["id"])
            centers[t, k] = d["center"]
            vis[t, k] = d["visibility"]
            masks[t, k] = rle_decode(d["mask_rle"])
            amodal[t, k] = rle_decode(d["amodal_rle"])
        dets = rec.get("detections")
        if dets is not None:
            has_masks = all(d.get("mask_rle") is not None for d in dets)
            detections.append(
                FrameDetections(
                    frame_index=t + 1,
                    e_obj=np.array([d["e_obj"] for d in dets], dtype=np.float64),
                    e_app=np.array([d["e_app"] for d in dets], dtype=np.float64),
                    conf=np.array([d["confidence"] for d in dets], dtype=np.float64),
                    class_ids=np.array([d["class_id"] for d in dets]),
                    hidden_ids=np.array([d["hidden_id"] for d in dets]),
                    masks=np.stack([rle_decode(d["mask_rle"]) for d in dets]) if has_masks else None,
                )
            )
    if detections and len(detections) != T:
        raise FormatError("detections present on only some frames")
    return sc, GroundTruth(centers, vis, masks, amodal), (detections or None)
