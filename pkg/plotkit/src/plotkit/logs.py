"""Readers for the navigation run-log schema.

Consumes only the documented on-disk formats (run.ndjson, metrics.json,
signals/*.csv, comparison.csv); no linkage to the simulator's internal
types. Schema violations raise LogSchemaError naming the offending
field.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List

REQUIRED_RECORD_KEYS = (
    "t",
    "robot",
    "u",
    "status",
    "obstacles",
    "detections",
    "predictions",
    "audit_h",
)


class LogSchemaError(ValueError):
    pass


def read_run(path) -> List[dict]:
    """Parse a run.ndjson file into tick records, validating the schema."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"run log not found: {path}")
    records = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogSchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            for key in REQUIRED_RECORD_KEYS:
                if key not in rec:
                    raise LogSchemaError(f"{path}:{lineno}: missing field {key!r}")
            records.append(rec)
    if not records:
        raise LogSchemaError(f"{path}: empty run log")
    return records


def read_metrics(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"metrics file not found: {path}")
    data = json.loads(path.read_text())
    for key in ("min_dist", "cons_time", "reac_time", "speed_var", "collided"):
        if key not in data:
            raise LogSchemaError(f"{path}: missing metric {key!r}")
    return data


def read_csv(path) -> Dict[str, list]:
    """Parse a signals/comparison CSV into named columns."""
    path = Path(path)
    lines = path.read_text().strip().splitlines()
    if not lines:
        raise LogSchemaError(f"{path}: empty table")
    header = lines[0].split(",")
    columns: Dict[str, list] = {h: [] for h in header}
    for lineno, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise LogSchemaError(
                f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}"
            )
        for h, cell in zip(header, cells):
            columns[h].append(_coerce(cell))
    return columns


def _coerce(cell: str):
    if cell == "":
        return None
    if cell in ("True", "False"):
        return cell == "True"
    try:
        return float(cell)
    except ValueError:
        return cell


def planner_kind_of(run_dir) -> str:
    """Planner kind recorded in a run directory's metrics.csv."""
    table = read_csv(Path(run_dir) / "metrics.csv")
    if "planner" not in table or not table["planner"]:
        raise LogSchemaError(f"{run_dir}: metrics.csv missing planner column")
    return str(table["planner"][0])
