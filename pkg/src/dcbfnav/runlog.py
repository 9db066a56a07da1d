"""Run-log serialization: newline-delimited records plus flat CSV signals.

Output layout of a run directory:

    run.ndjson        one JSON record per tick (documented schema below)
    metrics.json      RunMetrics as a single JSON object
    metrics.csv       one-row table with the comparison columns
    telemetry.ndjson  per-cycle solver telemetry incl. wall time
    signals/*.csv     flat per-signal tables for plotting
    scenario.yaml     resolved scenario copy
    params.json       resolved pipeline parameters

Wall-clock timings live only in telemetry.ndjson; every other file is a
pure function of (scenario, planner, params, seed) and byte-identical
across repeated runs.

Tick record keys: t, robot [x, y, heading], u [v, omega], u_free,
du_norm, status, cost, iterations, min_cbf_residual, obstacles (ground
truth: id, center, radius), detections (label, ellipse [cx, cy, a, b,
theta]), predictions (label, ellipses, radii), audit_h (per ground-truth
obstacle), any_dynamic_in_map.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Sequence

SIGNAL_FILES = {
    "robot": ["t", "x", "y", "heading"],
    "controls": ["t", "v", "omega", "v_free", "omega_free", "du_norm"],
    "obstacles": ["t", "obstacle", "x", "y", "radius"],
    "detections": ["t", "label", "cx", "cy", "a", "b", "theta"],
    "barriers": ["t", "obstacle", "audit_h"],
    "solver": ["t", "status", "cost", "iterations", "min_cbf_residual"],
}


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the destination directory plus rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps_record(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"), sort_keys=True)


def write_ndjson(path, records: Iterable[dict]) -> None:
    text = "".join(dumps_record(r) + "\n" for r in records)
    atomic_write_text(path, text)


def read_ndjson(path) -> List[dict]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_signals(outdir, records: List[dict]) -> None:
    """Explode tick records into flat per-signal CSV tables."""
    outdir = Path(outdir) / "signals"

    robot_rows = [[r["t"], *r["robot"]] for r in records]
    write_csv(outdir / "robot.csv", SIGNAL_FILES["robot"], robot_rows)

    control_rows = []
    for r in records:
        u_free = r.get("u_free") or [None, None]
        control_rows.append([r["t"], *r["u"], u_free[0], u_free[1], r.get("du_norm")])
    write_csv(outdir / "controls.csv", SIGNAL_FILES["controls"], control_rows)

    ob_rows = []
    for r in records:
        for ob in r["obstacles"]:
            ob_rows.append([r["t"], ob["id"], ob["center"][0], ob["center"][1], ob["radius"]])
    write_csv(outdir / "obstacles.csv", SIGNAL_FILES["obstacles"], ob_rows)

    det_rows = []
    for r in records:
        for det in r["detections"]:
            det_rows.append([r["t"], det["label"], *det["ellipse"]])
    write_csv(outdir / "detections.csv", SIGNAL_FILES["detections"], det_rows)

    bar_rows = []
    for r in records:
        for i, h in enumerate(r["audit_h"]):
            bar_rows.append([r["t"], i, h])
    write_csv(outdir / "barriers.csv", SIGNAL_FILES["barriers"], bar_rows)

    solver_rows = [
        [r["t"], r["status"], r["cost"], r["iterations"], r["min_cbf_residual"]]
        for r in records
    ]
    write_csv(outdir / "solver.csv", SIGNAL_FILES["solver"], solver_rows)
