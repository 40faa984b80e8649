"""File formats: track CSV/JSON, measurement JSON, scenario JSON, density
dump, diagnostics and evaluation CSVs."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .density import MultiScanGlmbDensity, density_to_dict
from .errors import ConfigError
from .labels import Label, TrajectorySegment
from .models import Scenario, scenario_from_dict, scenario_to_dict


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def save_scenario(scenario: Scenario, path):
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    return scenario_from_dict(_load_json(path))


def segments_to_rows(segments: Iterable[TrajectorySegment]):
    """(label, scan, state) rows, sorted by label then scan."""
    rows = []
    for seg in segments:
        for scan in range(seg.start, seg.end + 1):
            rows.append((seg.label, scan, seg.state_at(scan)))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def write_tracks_csv(segments: Iterable[TrajectorySegment], path, d: int):
    header = ["label", "scan"] + [f"x{i + 1}" for i in range(d)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for label, scan, state in segments_to_rows(segments):
            writer.writerow([str(label), scan] + [repr(float(v)) for v in state])


def write_tracks_json(segments: Iterable[TrajectorySegment], path, d: int):
    rows = [
        {"label": str(label), "scan": scan, **{f"x{i + 1}": float(v) for i, v in enumerate(state)}}
        for label, scan, state in segments_to_rows(segments)
    ]
    with open(path, "w") as fh:
        json.dump({"d": d, "rows": rows}, fh, indent=2)
        fh.write("\n")


def read_tracks_csv(path) -> dict[Label, dict[int, np.ndarray]]:
    """Track table keyed by label then scan; inverse of write_tracks_csv."""
    tracks: dict[Label, dict[int, np.ndarray]] = {}
    try:
        fh = open(path, newline="")
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["label", "scan"]:
            raise ConfigError(f"{path}: expected a track CSV with 'label,scan,x1..' header")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                label = Label.parse(row[0])
                scan = int(row[1])
                state = np.array([float(v) for v in row[2:]])
            except ValueError as exc:
                raise ConfigError(f"{path}:{line}: malformed track row: {exc}") from None
            tracks.setdefault(label, {})[scan] = state
    return tracks


def write_measurements_json(measurements, path):
    payload = {
        "scans": len(measurements),
        "measurements": [np.asarray(Z, dtype=float).tolist() for Z in measurements],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def read_measurements_json(path) -> list[np.ndarray]:
    data = _load_json(path)
    for name in ("scans", "measurements"):
        if name not in data:
            raise ConfigError(f"{path}: missing required field '{name}'")
    out = []
    for scan in data["measurements"]:
        arr = np.asarray(scan, dtype=float)
        if arr.size == 0:
            arr = arr.reshape(0, 0)
        out.append(arr)
    if len(out) != int(data["scans"]):
        raise ConfigError(f"{path}: field 'scans' disagrees with the measurement list")
    return out


def write_density_json(density: MultiScanGlmbDensity, path):
    with open(path, "w") as fh:
        json.dump(density_to_dict(density), fh)
        fh.write("\n")


def write_diagnostics_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "log_weight", "distinct_histories"])
        for iteration, log_weight, distinct in rows:
            writer.writerow([iteration, repr(float(log_weight)), distinct])


EVALUATION_HEADER = [
    "scan",
    "ospa_total",
    "ospa_loc",
    "ospa_card",
    "ospa2_total",
    "ospa2_loc",
    "ospa2_card",
]


def write_evaluation_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVALUATION_HEADER)
        for row in rows:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def read_evaluation_csv(path) -> list[tuple]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != EVALUATION_HEADER:
            raise ConfigError(f"{path}: not an evaluation CSV")
        return [(int(r[0]),) + tuple(float(v) for v in r[1:]) for r in reader if r]
