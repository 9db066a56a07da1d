"""Command-line entry point: run scenarios, sweep variants, validate configs.

Exit codes: 0 success, 1 configuration error, 2 collision, 3 timeout.
Parameter overrides use dotted keys against the RunParams tree, e.g.
``--set planner.gamma_cbf=0.2 --set tracker.window=8``; scenario files
stay immutable across sweeps.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import click
import numpy as np
import yaml

from dcbfnav.planner import PLANNER_KINDS
from dcbfnav.runlog import atomic_write_text, dumps_record, write_csv, write_ndjson, write_signals
from dcbfnav.scenario import Scenario
from dcbfnav.sim import RunMetrics, RunParams, ScenarioRun, run

log = logging.getLogger("dcbfnav")

METRIC_COLUMNS = ["planner", "seed", "min_dist", "cons_time", "reac_time", "speed_var", "collided"]


def _setup_logging() -> None:
    level = os.environ.get("DCBFNAV_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def apply_overrides(params: RunParams, pairs: Sequence[str]) -> RunParams:
    """Apply ``section.field=value`` overrides onto the params tree."""
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not of the form key=value")
        dotted, raw = pair.split("=", 1)
        path = dotted.strip().split(".")
        target = params
        for attr in path[:-1]:
            if not hasattr(target, attr):
                raise ValueError(f"unknown override section {attr!r} in {dotted!r}")
            target = getattr(target, attr)
        leaf = path[-1]
        if not hasattr(target, leaf):
            raise ValueError(f"unknown override field {dotted!r}")
        current = getattr(target, leaf)
        value = yaml.safe_load(raw)
        if isinstance(current, tuple) and isinstance(value, (list, tuple)):
            value = tuple(float(v) for v in value)
        elif isinstance(current, bool):
            value = bool(value)
        elif isinstance(current, int) and not isinstance(current, bool):
            value = int(value)
        elif isinstance(current, float):
            value = float(value)
        elif isinstance(current, str):
            value = str(value)
        elif isinstance(current, np.ndarray):
            value = np.asarray(value, dtype=float)
        setattr(target, leaf, value)
    return params


def _params_to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {
            f.name: _params_to_dict(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    return obj


def _load_scenario(path: str) -> Scenario:
    """Parse and validate a scenario file; exits 1 with diagnostics."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        click.echo(f"error: cannot read scenario file: {exc}", err=True)
        sys.exit(1)
    try:
        return Scenario.from_yaml(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        click.echo(f"error: malformed scenario ({where}): {exc.problem}", err=True)
        sys.exit(1)
    except (ValueError, TypeError) as exc:
        click.echo(f"error: invalid scenario: {exc}", err=True)
        sys.exit(1)


def _check_planner_kind(kind: str) -> None:
    if kind not in PLANNER_KINDS:
        click.echo(
            f"error: unknown planner kind {kind!r}; valid kinds: {', '.join(PLANNER_KINDS)}",
            err=True,
        )
        sys.exit(1)


def _metric_row(kind: str, seed: int, m: RunMetrics) -> list:
    return [kind, seed, m.min_dist, m.cons_time, m.reac_time, m.speed_var, m.collided]


def write_run_outputs(outdir: Path, result: ScenarioRun, params: RunParams) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    write_ndjson(outdir / "run.ndjson", result.records)
    write_ndjson(outdir / "telemetry.ndjson", result.telemetry)
    atomic_write_text(
        outdir / "metrics.json", dumps_record(result.metrics.to_dict()) + "\n"
    )
    write_csv(
        outdir / "metrics.csv",
        METRIC_COLUMNS,
        [_metric_row(result.planner_kind, result.scenario.seed, result.metrics)],
    )
    write_signals(outdir, result.records)
    atomic_write_text(outdir / "scenario.yaml", result.scenario.to_yaml())
    atomic_write_text(
        outdir / "params.json",
        json.dumps(_params_to_dict(params), indent=2, sort_keys=True) + "\n",
    )
    if result.grids is not None:
        np.savez_compressed(
            outdir / "grids.npz",
            **{f"mask_{i:05d}": g for i, g in enumerate(result.grids)},
        )


def _exit_code(metrics: RunMetrics) -> int:
    if metrics.outcome == "collision":
        return 2
    if metrics.outcome == "timeout":
        return 3
    return 0


@click.group()
def main() -> None:
    """Obstacle-avoidance simulation and comparison harness."""
    _setup_logging()


@main.command("run")
@click.option("--scenario", "scenario_path", required=True, help="Scenario YAML file.")
@click.option("--planner", default="mpc-dcbf", help="Planner kind.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out", "outdir", default=None, help="Output directory.")
@click.option("--set", "overrides", multiple=True, help="Dotted parameter override key=value.")
@click.option("--log-grids", is_flag=True, help="Also store per-tick obstacle masks.")
@click.option("--no-shadow", is_flag=True, help="Skip the obstacle-free reference solve.")
def cmd_run(scenario_path, planner, seed, outdir, overrides, log_grids, no_shadow):
    """Run one episode and write logs plus a metrics summary."""
    _check_planner_kind(planner)
    scenario = _load_scenario(scenario_path)
    if seed is not None:
        scenario = dataclasses.replace(scenario, seed=seed)
    params = RunParams()
    try:
        apply_overrides(params, overrides)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    result = run(
        scenario, planner, params=params, shadow=not no_shadow, collect_grids=log_grids
    )
    if outdir is None:
        outdir = f"runs/{scenario.name}_{planner}_seed{scenario.seed}"
    write_run_outputs(Path(outdir), result, params)
    m = result.metrics
    click.echo(
        f"{planner} on {scenario.name} (seed {scenario.seed}): {m.outcome}, "
        f"min_dist={m.min_dist:.3f}, cons_time={m.cons_time:.2f}, "
        f"reac_time={m.reac_time:.2f}, speed_var={m.speed_var:.4f}"
    )
    click.echo(f"outputs in {outdir}")
    sys.exit(_exit_code(m))


def _format_table(rows: List[dict]) -> str:
    headers = ["Algorithm", "Min dist (m)", "Cons time (s)", "Reac time (s)", "Speed var"]
    lines = ["  ".join(f"{h:>16s}" for h in headers)]
    for r in rows:
        if r.get("error"):
            lines.append(f"{r['planner']:>16s}  " + f"run failed: {r['error']}")
            continue
        min_dist = (
            f"{r['min_dist']:.3f}(collided)" if r["collided"] else f"{r['min_dist']:.3f}"
        )
        cons = "-" if math.isnan(r["cons_time"]) else f"{r['cons_time']:.2f}"
        reac = "-" if math.isnan(r["reac_time"]) else f"{r['reac_time']:.3f}"
        svar = f"{r['speed_var']:.4f}"
        lines.append(
            f"{r['planner']:>16s}  {min_dist:>16s}  {cons:>16s}  {reac:>16s}  {svar:>16s}"
        )
    return "\n".join(lines) + "\n"


@main.command("compare")
@click.option("--scenario", "scenario_path", required=True)
@click.option("--planners", default=",".join(PLANNER_KINDS), help="Comma-separated kinds.")
@click.option("--seeds", default=None, help="Comma-separated seeds (default: scenario seed).")
@click.option("--out", "outdir", default=None)
@click.option("--set", "overrides", multiple=True)
def cmd_compare(scenario_path, planners, seeds, outdir, overrides):
    """Run all (planner, seed) pairs and emit a comparison table."""
    scenario = _load_scenario(scenario_path)
    kinds = [k.strip() for k in planners.split(",") if k.strip()]
    if not kinds:
        click.echo("error: no planner kinds given", err=True)
        sys.exit(1)
    for kind in kinds:
        _check_planner_kind(kind)
    if seeds is None:
        seed_list = [scenario.seed]
    else:
        try:
            seed_list = [int(s) for s in seeds.split(",") if s.strip() != ""]
        except ValueError:
            click.echo(f"error: invalid seed list {seeds!r}", err=True)
            sys.exit(1)
    if not seed_list:
        click.echo("error: empty seed list", err=True)
        sys.exit(1)

    params = RunParams()
    try:
        apply_overrides(params, overrides)
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    outdir = Path(outdir or f"runs/compare_{scenario.name}")
    per_run_rows = []
    agg_rows = []
    for kind in kinds:
        metrics_list = []
        for seed in seed_list:
            sc = dataclasses.replace(scenario, seed=seed)
            try:
                result = run(sc, kind, params=params)
            except Exception as exc:  # recorded in-table, sweep continues
                log.exception("run failed for %s seed %s", kind, seed)
                per_run_rows.append({"planner": kind, "seed": seed, "error": str(exc)})
                continue
            m = result.metrics
            metrics_list.append(m)
            per_run_rows.append(
                {
                    "planner": kind,
                    "seed": seed,
                    "min_dist": m.min_dist,
                    "cons_time": m.cons_time,
                    "reac_time": m.reac_time,
                    "speed_var": m.speed_var,
                    "collided": m.collided,
                    "outcome": m.outcome,
                }
            )
            write_run_outputs(outdir / f"{kind}_seed{seed}", result, params)
        if metrics_list:
            agg_rows.append(
                {
                    "planner": kind,
                    "min_dist": float(np.mean([m.min_dist for m in metrics_list])),
                    "cons_time": float(np.mean([m.cons_time for m in metrics_list])),
                    "reac_time": float(np.mean([m.reac_time for m in metrics_list])),
                    "speed_var": float(np.mean([m.speed_var for m in metrics_list])),
                    "collided": any(m.collided for m in metrics_list),
                }
            )
        else:
            agg_rows.append({"planner": kind, "error": "all runs failed"})

    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(
        outdir / "comparison.csv",
        METRIC_COLUMNS,
        [
            [
                r["planner"], r["seed"], r.get("min_dist"), r.get("cons_time"),
                r.get("reac_time"), r.get("speed_var"), r.get("collided"),
            ]
            for r in per_run_rows
            if "error" not in r
        ],
    )
    atomic_write_text(
        outdir / "comparison.json",
        json.dumps({"per_run": per_run_rows, "mean": agg_rows}, indent=2, sort_keys=True,
                   default=str) + "\n",
    )
    table = _format_table(agg_rows)
    atomic_write_text(outdir / "comparison.txt", table)
    click.echo(table)
    click.echo(f"outputs in {outdir}")


@main.command("validate")
@click.option("--scenario", "scenario_path", required=True)
def cmd_validate(scenario_path):
    """Parse and validate a scenario file."""
    scenario = _load_scenario(scenario_path)
    # round-trip check: parse -> serialize -> parse must be lossless
    again = Scenario.from_yaml(scenario.to_yaml())
    if again != scenario:
        click.echo("error: scenario does not round-trip through serialization", err=True)
        sys.exit(1)
    click.echo(
        f"ok: {scenario.name} ({len(scenario.static_obstacles)} static, "
        f"{len(scenario.dynamic_obstacles)} dynamic obstacles, seed {scenario.seed})"
    )


if __name__ == "__main__":
    main()
