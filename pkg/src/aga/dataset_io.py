"""On-disk formats: RLE masks, scenario files, track outputs and reports.

Scenario and track files are JSON lines: a header object followed by one
object per frame (``frame_index`` contiguous from 1). Output is canonical
(sorted keys, compact separators, shortest round-trip float repr) so the
same data always serializes to the same bytes.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

FORMAT_VERSION = 1


class FormatError(ValueError):
    """Malformed file content. ``line`` is 1-based when known."""

    def __init__(self, message: str, path=None, line: Optional[int] = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line


class VersionError(FormatError):
    pass


class MalformedRLEError(FormatError):
    pass


# -- RLE ---------------------------------------------------------------------


def rle_encode(mask, threshold: float = 0.5) -> dict:
    """Row-major run lengths, alternating 0-runs and 1-runs, starting with 0s."""
    m = np.asarray(mask)
    if m.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {m.shape}")
    height, width = m.shape
    flat = (m >= threshold).ravel().astype(np.int8)
    if flat.size == 0:
        return {"height": height, "width": width, "counts": []}
    change = np.flatnonzero(np.diff(flat)) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0] == 1:
        counts.insert(0, 0)
    return {"height": int(height), "width": int(width), "counts": [int(c) for c in counts]}


def rle_decode(rle: dict) -> np.ndarray:
    try:
        height, width = int(rle["height"]), int(rle["width"])
        counts = [int(c) for c in rle["counts"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRLEError(f"bad RLE record: {exc}") from None
    if any(c < 0 for c in counts):
        raise MalformedRLEError("negative run length")
    if any(c == 0 for c in counts[1:]):
        raise MalformedRLEError("zero-length run after the first")
    if sum(counts) != height * width:
        raise MalformedRLEError(f"run lengths sum to {sum(counts)}, expected {height * width}")
    values = np.arange(len(counts)) % 2
    flat = np.repeat(values.astype(bool), counts)
    return flat.reshape(height, width)


# -- canonical JSON ------------------------------------------------------------


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_jsonl(path, header: dict, records: Iterable[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(header) + "\n")
        for rec in records:
            fh.write(dumps(rec) + "\n")


def read_jsonl(path, expected_type: str) -> tuple[dict, list[dict]]:
    """Parse a header + contiguous frame records, with line-numbered errors."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty file", path)
    parsed = []
    for lineno, line in enumerate(lines, start=1):
        try:
            parsed.append(json.loads(line))
        except json.JSONDecodeError as exc:
            last = f"last good line is {lineno - 1}" if lineno > 1 else "no valid lines"
            raise FormatError(f"malformed JSON ({exc.msg}); {last}", path, lineno) from None
    header, frames = parsed[0], parsed[1:]
    if not isinstance(header, dict) or "format_version" not in header:
        raise FormatError("missing header", path, 1)
    if header["format_version"] != FORMAT_VERSION:
        raise VersionError(
            f"unsupported format_version {header['format_version']!r} (expected {FORMAT_VERSION})",
            path,
            1,
        )
    if header.get("type") != expected_type:
        raise FormatError(f"expected a {expected_type} file, got {header.get('type')!r}", path, 1)
    for i, rec in enumerate(frames):
        if not isinstance(rec, dict) or rec.get("frame_index") != i + 1:
            got = rec.get("frame_index") if isinstance(rec, dict) else None
            raise FormatError(f"non-contiguous frame index {got!r}, expected {i + 1}", path, i + 2)
    n_expected = header.get("frames")
    if n_expected is not None and len(frames) != n_expected:
        raise FormatError(
            f"truncated: expected {n_expected} frames, last good line is {len(lines)}",
            path,
            len(lines),
        )
    return header, frames


# -- scenarios -----------------------------------------------------------------


def write_scenario(path, scenario, gt, detections=None) -> None:
    from .scenario_gen import scenario_header, frame_records

    write_jsonl(path, scenario_header(scenario), frame_records(scenario, gt, detections))


def read_scenario(path):
    """Returns (Scenario, GroundTruth, detections or None)."""
    from .scenario_gen import scenario_from_records

    header, frames = read_jsonl(path, "scenario")
    try:
        return scenario_from_records(header, frames)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"invalid scenario content: {exc!r}", path) from None


# -- track outputs -------------------------------------------------------------


def write_track_output(path, video_id: str, variant: dict, out) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "type": "track_output",
        "video_id": video_id,
        "variant": variant,
        "frames": len(out.orders),
    }
    records = []
    for t, (order, pred, scores) in enumerate(zip(out.orders, out.predictions, out.scores)):
        records.append(
            {
                "frame_index": t + 1,
                "order": list(order),
                "confidence": pred.conf,
                "class_ids": pred.class_ids,
                "hidden_ids": pred.hidden_ids,
                "scores": scores,
            }
        )
    write_jsonl(path, header, records)


def read_track_output(path) -> tuple[dict, list[dict]]:
    return read_jsonl(path, "track_output")


# -- reports -------------------------------------------------------------------


def write_report(path, report: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(report) + "\n", encoding="utf-8")


def read_report(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"malformed JSON ({exc.msg})", path, exc.lineno) from None


def write_csv(path, rows: list[dict], columns: list[str]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: _csv_value(row.get(c)) for c in columns})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v
