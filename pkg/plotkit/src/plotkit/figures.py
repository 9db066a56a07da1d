"""Figure builders: trajectory overlays, barrier time series, metric tables."""

from __future__ import annotations

import math
from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.patches import Ellipse as MplEllipse

from plotkit.logs import planner_kind_of, read_csv, read_run

KIND_COLORS = {
    "mpc-euclid": "tab:red",
    "mpc-cbf": "tab:green",
    "mpc-kf": "tab:purple",
    "mpc-cbf-curvefit": "black",
    "mpc-dcbf": "tab:blue",
}
FALLBACK_COLORS = ["tab:orange", "tab:brown", "tab:pink", "tab:gray", "tab:cyan"]


def _ellipse_patch(params, **kw) -> MplEllipse:
    cx, cy, a, b, theta = params
    return MplEllipse(
        (cx, cy), width=2 * a, height=2 * b, angle=math.degrees(theta), **kw
    )


def find_zero_crossings(ts: Sequence[float], hs: Sequence[float]) -> List[float]:
    """Interpolated times where a barrier series crosses below zero."""
    crossings = []
    for (t0, h0), (t1, h1) in zip(zip(ts, hs), zip(ts[1:], hs[1:])):
        if h0 >= 0.0 > h1:
            crossings.append(t0 + (t1 - t0) * h0 / (h0 - h1))
    return crossings


def plot_trajectory(
    run_dirs: Sequence, out_path, fan_every: float = 2.0, fan_ks: Sequence[int] = (0, 8, 16, 24)
) -> Path:
    """Overlay robot trajectories per planner kind plus obstacle tracks.

    Obstacle ground-truth tracks come from the first run; a sampled fan
    of predicted inflated ellipses is drawn for the first run that
    carries predictions.
    """
    if not run_dirs:
        raise ValueError("need at least one run directory")
    fig, ax = plt.subplots(figsize=(10, 6))

    fan_drawn = False
    for i, run_dir in enumerate(run_dirs):
        run_dir = Path(run_dir)
        records = read_run(run_dir / "run.ndjson")
        kind = planner_kind_of(run_dir)
        color = KIND_COLORS.get(kind, FALLBACK_COLORS[i % len(FALLBACK_COLORS)])
        xs = [r["robot"][0] for r in records]
        ys = [r["robot"][1] for r in records]
        ax.plot(xs, ys, color=color, label=kind, linewidth=1.8)

        if i == 0:
            _draw_obstacle_tracks(ax, records)
        if not fan_drawn and any(r["predictions"] for r in records):
            _draw_prediction_fan(ax, records, fan_every, fan_ks)
            fan_drawn = True

    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal", adjustable="datalim")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return out_path


def _draw_obstacle_tracks(ax, records) -> None:
    by_id = {}
    for rec in records:
        for ob in rec["obstacles"]:
            by_id.setdefault(ob["id"], []).append((ob["center"][0], ob["center"][1], ob))
    for ob_id, track in by_id.items():
        xs = [p[0] for p in track]
        ys = [p[1] for p in track]
        meta = track[0][2]
        if meta.get("dynamic"):
            ax.plot(xs, ys, linestyle="--", color="darkorange", linewidth=1.2)
            ax.plot(xs[0], ys[0], marker="o", color="darkorange", markersize=4)
        else:
            ax.plot(xs[0], ys[0], marker="s", color="dimgray", markersize=9)


def _draw_prediction_fan(ax, records, fan_every: float, fan_ks) -> None:
    next_t = 0.0
    for rec in records:
        if rec["t"] + 1e-9 < next_t or not rec["predictions"]:
            continue
        next_t = rec["t"] + fan_every
        for pred in rec["predictions"]:
            chain = pred["ellipses"]
            for k in fan_ks:
                if k >= len(chain):
                    continue
                alpha = 0.35 * (1.0 - 0.8 * k / max(len(chain) - 1, 1))
                ax.add_patch(
                    _ellipse_patch(
                        chain[k], fill=False, color="tab:cyan", alpha=max(alpha, 0.05),
                        linewidth=0.8,
                    )
                )


def plot_barrier(run_dir, out_path, gamma: float = 0.15, dt: float = 0.1) -> Path:
    """Audited barrier values over time with zero line and decay envelope.

    Draws h(t) per ground-truth obstacle, the zero line, the (1 - gamma)
    per-step decay envelope from each obstacle's first in-map sample, and
    marks zero crossings.
    """
    run_dir = Path(run_dir)
    records = read_run(run_dir / "run.ndjson")
    fig, ax = plt.subplots(figsize=(10, 4))

    n_obstacles = max((len(r["audit_h"]) for r in records), default=0)
    crossing_marked = False
    for ob in range(n_obstacles):
        ts, hs = [], []
        for rec in records:
            if ob < len(rec["audit_h"]):
                ts.append(rec["t"])
                hs.append(rec["audit_h"][ob])
        if not ts:
            continue
        (line,) = ax.plot(ts, hs, linewidth=1.5, label=f"obstacle {ob}")
        # decay envelope anchored at the first sample
        env = [hs[0]]
        for _ in ts[1:]:
            env.append(env[-1] * (1.0 - gamma))
        ax.plot(ts, env, linestyle=":", color=line.get_color(), alpha=0.6, linewidth=1.0)
        for tc in find_zero_crossings(ts, hs):
            ax.plot(tc, 0.0, marker="x", color="red", markersize=10, zorder=5)
            crossing_marked = True

    ax.axhline(0.0, color="black", linewidth=1.0)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("audited barrier h [m]")
    if n_obstacles:
        ax.legend(fontsize=8, loc="best")
    title = "barrier audit"
    if crossing_marked:
        title += " (zero crossings marked)"
    ax.set_title(title)
    ax.grid(alpha=0.3)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return out_path


def plot_metrics_table(comparison_csv, out_path) -> Path:
    """Render a comparison table (one row per planner/seed) as a figure."""
    table = read_csv(comparison_csv)
    headers = list(table.keys())
    n_rows = len(next(iter(table.values()), []))
    rows = []
    for i in range(n_rows):
        row = []
        for h in headers:
            v = table[h][i]
            if isinstance(v, float):
                row.append("-" if math.isnan(v) else f"{v:.3f}")
            else:
                row.append(str(v))
        rows.append(row)

    fig, ax = plt.subplots(figsize=(1.6 * len(headers), 0.5 * (n_rows + 2)))
    ax.axis("off")
    tbl = ax.table(cellText=rows, colLabels=headers, loc="center")
    tbl.auto_set_font_size(False)
    tbl.set_fontsize(9)
    tbl.scale(1.0, 1.4)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return out_path
