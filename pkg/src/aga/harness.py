"""Experiment runner: generate suites, track with variants, evaluate.

Directory layout under an output root::

    dataset/manifest.json          suite config + one entry per video
    dataset/videos/<id>.jsonl      scenario files
    tracks/<variant>/<id>.jsonl    track outputs
    tracks/timing.json             per-variant wall-clock summary
    report/report.json             aggregate + per-video metrics
    report/summary.csv, report/per_video.csv, report/long.csv
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np
import yaml

from . import dataset_io as io
from .metrics import association_accuracy, count_id_switches, spatiotemporal_ap
from .scenario_gen import KINDS, ScenarioParams, SimulatorParams, generate_scenario, simulate_detections
from .similarity import FusionWeights
from .tracker import TrackerConfig, track_video

log = logging.getLogger("aga")


class ConfigError(ValueError):
    pass


class MissingVideosError(RuntimeError):
    pass


@dataclass
class SuiteConfig:
    num_track_videos: int = 500
    num_swap_videos: int = 500
    seed: int = 0
    scenario: ScenarioParams = field(default_factory=ScenarioParams)


@dataclass(frozen=True)
class Variant:
    name: str
    window: int = 5
    lambda_obj: float = 1.0
    lambda_app: float = 1.0
    alg1_literal_order: bool = False

    def tracker_config(self) -> TrackerConfig:
        return TrackerConfig(
            window=self.window,
            fusion=FusionWeights(self.lambda_obj, self.lambda_app),
            alg1_literal_order=self.alg1_literal_order,
        )


# the four-cell appearance x memory grid, plus the printed-listing order
DEFAULT_VARIANTS = (
    Variant("visage", window=5, lambda_obj=1.0, lambda_app=1.0),
    Variant("no-app", window=5, lambda_obj=1.0, lambda_app=0.0),
    Variant("no-mem", window=1, lambda_obj=1.0, lambda_app=1.0),
    Variant("neither", window=1, lambda_obj=1.0, lambda_app=0.0),
    Variant("visage-literal", window=5, lambda_obj=1.0, lambda_app=1.0, alg1_literal_order=True),
)

SWEEP_WINDOWS = (1, 2, 3, 5, 10)


@dataclass
class ExperimentConfig:
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    simulator: SimulatorParams = field(default_factory=SimulatorParams)
    variants: tuple[Variant, ...] = DEFAULT_VARIANTS
    out: str = "runs/default"
    jobs: int = 1

    def variant(self, name: str) -> Variant:
        for v in self.variants:
            if v.name == name:
                return v
        raise ConfigError(f"unknown variant {name!r}; known: {', '.join(v.name for v in self.variants)}")


# -- config loading --------------------------------------------------------------


def _build(cls, data: Any, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    names = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data or {})
    unknown = set(data) - {"suite", "scenario", "simulator", "variants", "out", "jobs"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    suite = _build(SuiteConfig, data.get("suite"), "suite")
    suite.scenario = _build(ScenarioParams, data.get("scenario"), "scenario")
    cfg = ExperimentConfig(suite=suite, simulator=_build(SimulatorParams, data.get("simulator"), "simulator"))
    if "variants" in data:
        if not isinstance(data["variants"], list) or not data["variants"]:
            raise ConfigError("variants must be a non-empty list")
        cfg.variants = tuple(_build(Variant, v, "variant") for v in data["variants"])
    if "out" in data:
        cfg.out = str(data["out"])
    if "jobs" in data:
        cfg.jobs = int(data["jobs"])
    validate_config(cfg)
    return cfg


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(data or {})


def validate_config(cfg: ExperimentConfig) -> None:
    s = cfg.suite
    if s.num_track_videos < 0 or s.num_swap_videos < 0:
        raise ConfigError("video counts must be >= 0")
    if s.num_track_videos + s.num_swap_videos == 0:
        raise ConfigError("suite has no videos")
    if not 0 <= int(s.seed) < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    try:
        for kind in KINDS:
            if (kind == "track" and s.num_track_videos) or (kind == "swap" and s.num_swap_videos):
                s.scenario.validate(kind)
        cfg.simulator.validate()
        for v in cfg.variants:
            v.tracker_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not cfg.variants:
        raise ConfigError("need at least one tracker variant")
    names = [v.name for v in cfg.variants]
    if len(set(names)) != len(names):
        raise ConfigError("variant names must be unique")
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    suite = asdict(cfg.suite)
    scenario = suite.pop("scenario")
    return {
        "suite": suite,
        "scenario": scenario,
        "simulator": asdict(cfg.simulator),
        "variants": [asdict(v) for v in cfg.variants],
    }


# -- helpers -------------------------------------------------------------------


def video_seed(suite_seed: int, kind: str, index: int) -> int:
    state = np.random.SeedSequence([int(suite_seed), KINDS.index(kind), index]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def dataset_dir(out) -> Path:
    return Path(out) / "dataset"


def tracks_dir(out) -> Path:
    return Path(out) / "tracks"


def report_dir(out) -> Path:
    return Path(out) / "report"


# -- generate --------------------------------------------------------------------


def _generate_one(job: tuple) -> dict:
    video_id, kind, seed, scenario, simulator, path = job
    sc, gt = generate_scenario(seed, kind, scenario, video_id)
    dets = simulate_detections(sc, gt, simulator)
    io.write_scenario(path, sc, gt, dets)
    return {"video_id": video_id, "kind": kind, "seed": seed, "file": f"videos/{video_id}.jsonl"}


def cmd_generate(cfg: ExperimentConfig, kinds: Sequence[str] = KINDS) -> Path:
    root = dataset_dir(cfg.out)
    (root / "videos").mkdir(parents=True, exist_ok=True)
    jobs = []
    for kind in kinds:
        count = cfg.suite.num_track_videos if kind == "track" else cfg.suite.num_swap_videos
        for i in range(count):
            vid = f"{kind}_{i:04d}"
            seed = video_seed(cfg.suite.seed, kind, i)
            jobs.append((vid, kind, seed, cfg.suite.scenario, cfg.simulator, root / "videos" / f"{vid}.jsonl"))
    if not jobs:
        raise ConfigError("selected kinds produce no videos")
    log.info("generating %d videos into %s", len(jobs), root)
    entries = _map(_generate_one, jobs, cfg.jobs)
    entries.sort(key=lambda e: e["video_id"])
    manifest = {"format_version": io.FORMAT_VERSION, "config": config_to_dict(cfg), "videos": entries}
    io.write_report(root / "manifest.json", manifest)
    return root


def read_manifest(dataset) -> dict:
    path = Path(dataset) / "manifest.json"
    if not path.exists():
        raise MissingVideosError(f"no manifest at {path}")
    manifest = io.read_report(path)
    if manifest.get("format_version") != io.FORMAT_VERSION:
        raise io.VersionError(f"unsupported manifest format_version {manifest.get('format_version')!r}", path)
    return manifest


# -- track ---------------------------------------------------------------------


def _track_one(job: tuple) -> tuple[str, dict]:
    video_path, out_paths, variants = job
    sc, _, dets = io.read_scenario(video_path)
    if dets is None:
        raise io.FormatError("scenario file has no detections", video_path)
    timing = {}
    for variant, out_path in zip(variants, out_paths):
        start = time.perf_counter()
        result = track_video(dets, variant.tracker_config())
        timing[variant.name] = time.perf_counter() - start
        io.write_track_output(out_path, sc.video_id, asdict(variant), result)
    return sc.video_id, timing


def cmd_track(cfg: ExperimentConfig, dataset=None, variant_names: Optional[Sequence[str]] = None, kinds=KINDS) -> Path:
    dataset = Path(dataset) if dataset is not None else dataset_dir(cfg.out)
    manifest = read_manifest(dataset)
    variants = [cfg.variant(n) for n in variant_names] if variant_names else list(cfg.variants)
    videos = [v for v in manifest["videos"] if v["kind"] in kinds]
    missing = [v["video_id"] for v in videos if not (dataset / v["file"]).exists()]
    if missing:
        raise MissingVideosError(f"missing videos: {', '.join(missing)}")
    out_root = tracks_dir(cfg.out)
    jobs = [
        (
            dataset / v["file"],
            [out_root / var.name / f"{v['video_id']}.jsonl" for var in variants],
            variants,
        )
        for v in videos
    ]
    log.info("tracking %d videos with %d variants", len(jobs), len(variants))
    results = _map(_track_one, jobs, cfg.jobs)
    summary = {}
    for var in variants:
        times = [t[var.name] for _, t in results]
        summary[var.name] = {
            "videos": len(times),
            "total_seconds": float(np.sum(times)),
            "mean_seconds_per_video": float(np.mean(times)) if times else 0.0,
        }
        log.info("variant %s: %.3fs total", var.name, summary[var.name]["total_seconds"])
    io.write_report(out_root / "timing.json", summary)
    return out_root


# -- evaluate --------------------------------------------------------------------


def evaluate_video(sc, gt, dets, records: list[dict]) -> dict:
    """Metrics for one (video, variant) from a parsed track output."""
    if len(records) != sc.frames:
        raise io.FormatError(f"{sc.video_id}: track output has {len(records)} frames, expected {sc.frames}")
    slot_ids = np.array([r["hidden_ids"] for r in records], dtype=np.int64)
    row = {
        "video_id": sc.video_id,
        "kind": sc.kind,
        "instances": len(sc.instances),
        "id_switches": count_id_switches(slot_ids, gt.ids),
        "association_accuracy": association_accuracy(slot_ids, gt.ids),
        "ap": None,
        "ap50": None,
        "ap75": None,
    }
    if dets is not None and all(d.masks is not None for d in dets):
        pred = np.stack([dets[t].masks[np.asarray(r["order"])] for t, r in enumerate(records)])
        scores = np.mean([r["confidence"] for r in records], axis=0)
        ap = spatiotemporal_ap(pred, scores, gt.masks)
        row.update(ap=ap["ap"], ap50=ap["ap50"], ap75=ap["ap75"])
    return row


def _evaluate_one(job: tuple) -> list[tuple[str, dict, list]]:
    video_path, track_paths = job
    sc, gt, dets = io.read_scenario(video_path)
    rows = []
    for name, path in track_paths:
        header, records = io.read_track_output(path)
        if header["video_id"] != sc.video_id:
            raise io.FormatError(f"track output is for {header['video_id']!r}, expected {sc.video_id!r}", path)
        row = evaluate_video(sc, gt, dets, records)
        row["variant"] = name
        rows.append((name, row, [tuple(r["order"]) for r in records]))
    return rows


def _mean(values) -> Optional[float]:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


def _aggregate(rows: list[dict]) -> dict:
    return {
        "videos": len(rows),
        "association_accuracy": _mean(r["association_accuracy"] for r in rows),
        "id_switches_total": int(sum(r["id_switches"] for r in rows)),
        "id_switches_mean": _mean(r["id_switches"] for r in rows),
        "ap": _mean(r["ap"] for r in rows),
        "ap50": _mean(r["ap50"] for r in rows),
        "ap75": _mean(r["ap75"] for r in rows),
    }


def _ordering_ab(variants: list[dict], orders: dict) -> list[dict]:
    """Compare each literal-order variant against its default-order twin."""
    out = []
    for lit in variants:
        if not lit.get("alg1_literal_order"):
            continue
        twin = next(
            (
                v
                for v in variants
                if not v.get("alg1_literal_order")
                and (v["window"], v["lambda_obj"], v["lambda_app"])
                == (lit["window"], lit["lambda_obj"], lit["lambda_app"])
            ),
            None,
        )
        if twin is None:
            continue
        a, b = orders[lit["name"]], orders[twin["name"]]
        differing = sorted(vid for vid in a if vid in b and a[vid] != b[vid])
        frames = sum(
            sum(1 for x, y in zip(a[vid], b[vid]) if x != y) for vid in differing
        )
        out.append(
            {
                "literal_variant": lit["name"],
                "default_variant": twin["name"],
                "videos_compared": len(set(a) & set(b)),
                "videos_differing": len(differing),
                "frames_differing": frames,
                "differing_video_ids": differing,
            }
        )
    return out


SUMMARY_COLUMNS = [
    "kind", "variant", "videos", "association_accuracy", "id_switches_total",
    "id_switches_mean", "ap", "ap50", "ap75",
]
PER_VIDEO_COLUMNS = [
    "video_id", "kind", "variant", "instances", "association_accuracy", "id_switches", "ap", "ap50", "ap75",
]
LONG_METRICS = ["association_accuracy", "id_switches", "ap", "ap50", "ap75"]


def cmd_evaluate(
    out, dataset=None, tracks=None, jobs: int = 1, variant_names=None, kinds=KINDS, report_to=None
) -> dict:
    dataset = Path(dataset) if dataset is not None else dataset_dir(out)
    tracks = Path(tracks) if tracks is not None else tracks_dir(out)
    manifest = read_manifest(dataset)
    if variant_names is None:
        variant_names = sorted(p.name for p in tracks.iterdir() if p.is_dir()) if tracks.is_dir() else []
    if not variant_names:
        raise MissingVideosError(f"no track outputs under {tracks}")
    videos = [v for v in manifest["videos"] if v["kind"] in kinds]
    missing = [
        f"{name}/{v['video_id']}"
        for name in variant_names
        for v in videos
        if not (tracks / name / f"{v['video_id']}.jsonl").exists()
    ]
    if missing:
        raise MissingVideosError(f"missing track outputs: {', '.join(missing)}")
    jobs_list = [
        (dataset / v["file"], [(name, tracks / name / f"{v['video_id']}.jsonl") for name in variant_names])
        for v in videos
    ]
    results = _map(_evaluate_one, jobs_list, jobs)

    per_video: list[dict] = []
    orders: dict[str, dict] = {name: {} for name in variant_names}
    variant_meta = {}
    for v, video_rows in zip(videos, results):
        for name, row, order in video_rows:
            per_video.append(row)
            orders[name][v["video_id"]] = order
    for name in variant_names:
        header, _ = io.read_track_output(tracks / name / f"{videos[0]['video_id']}.jsonl")
        variant_meta[name] = dict(header["variant"], name=name)
    per_video.sort(key=lambda r: (r["variant"], r["video_id"]))

    summary = []
    present_kinds = [k for k in KINDS if any(v["kind"] == k for v in videos)]
    for kind in present_kinds:
        for name in variant_names:
            rows = [r for r in per_video if r["kind"] == kind and r["variant"] == name]
            summary.append(dict(kind=kind, variant=name, **_aggregate(rows)))

    report = {
        "format_version": io.FORMAT_VERSION,
        "variants": [variant_meta[n] for n in variant_names],
        "summary": summary,
        "ordering_ab": _ordering_ab([variant_meta[n] for n in variant_names], orders),
        "per_video": per_video,
    }
    rdir = Path(report_to) if report_to is not None else report_dir(out)
    io.write_report(rdir / "report.json", report)
    io.write_csv(rdir / "summary.csv", summary, SUMMARY_COLUMNS)
    io.write_csv(rdir / "per_video.csv", per_video, PER_VIDEO_COLUMNS)
    long_rows = [
        {"video_id": r["video_id"], "kind": r["kind"], "variant": r["variant"], "metric": m, "value": r[m]}
        for r in per_video
        for m in LONG_METRICS
        if r[m] is not None
    ]
    io.write_csv(rdir / "long.csv", long_rows, ["video_id", "kind", "variant", "metric", "value"])
    return report


# -- sweep -----------------------------------------------------------------------


def window_variants(windows: Sequence[int] = SWEEP_WINDOWS, base: Variant = DEFAULT_VARIANTS[0]) -> tuple[Variant, ...]:
    return tuple(replace(base, name=f"{base.name}-w{w}", window=w) for w in windows)


def cmd_sweep(cfg: ExperimentConfig, windows: Sequence[int] = SWEEP_WINDOWS, kinds=KINDS) -> dict:
    """Window-size sweep over the fused variant; writes sweep/window_table.csv."""
    if not (dataset_dir(cfg.out) / "manifest.json").exists():
        cmd_generate(cfg, kinds)
    variants = window_variants(windows)
    swept = replace(cfg, variants=variants)
    cmd_track(swept, kinds=kinds)
    rdir = Path(cfg.out) / "sweep"
    report = cmd_evaluate(
        cfg.out, jobs=cfg.jobs, variant_names=[v.name for v in variants], kinds=kinds, report_to=rdir
    )
    by_name = {v.name: v.window for v in variants}
    table = [dict(row, window=by_name[row["variant"]]) for row in report["summary"]]
    table.sort(key=lambda r: (r["kind"], r["window"]))
    io.write_csv(
        rdir / "window_table.csv",
        table,
        ["kind", "window", "variant", "videos", "association_accuracy", "id_switches_total", "ap", "ap50", "ap75"],
    )
    return report
