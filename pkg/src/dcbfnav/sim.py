"""Deterministic 2D world, synthetic LiDAR, closed loop, and metrics.

The episode loop runs perception (raycast, elevation grid, clustering,
bounding ellipses, association), tracking, and planning at every tick
and executes the first planned control. All ground-truth bookkeeping
(collision, minimum clearance, barrier audit) is computed by independent
geometric routines that never touch the perception pipeline.

Metrics follow the comparison harness: minimum surface distance,
completion time, reaction time against a shadow obstacle-free plan, and
commanded-speed variance over the avoidance interval.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from dcbfnav.geometry import ControlInput, Ellipse, RobotState
from dcbfnav.localmap import (
    ElevationGrid,
    MapConfig,
    TraversabilityThresholds,
    build_grid,
    obstacle_mask,
)
from dcbfnav.perception import (
    AssociationParams,
    FrameAssociator,
    dbscan,
    min_bounding_ellipse,
)
from dcbfnav.planner import (
    PLANNER_KINDS,
    MpcSolution,
    PlannerParams,
    barrier,
    dynamics_step,
    plan_variant,
    shift_warm_start,
    solve,
)
from dcbfnav.scenario import Scenario, SensorConfig
from dcbfnav.tracking import ObstacleTracker, TrackerParams, confidence, true_position_confidence


@dataclass
class RunParams:
    """Every tunable of the closed loop, overridable per dotted key."""

    map: MapConfig = field(default_factory=MapConfig)
    thresholds: TraversabilityThresholds = field(default_factory=TraversabilityThresholds)
    cluster_eps: float = 0.3
    cluster_min_pts: int = 3
    association: AssociationParams = field(default_factory=AssociationParams)
    tracker: TrackerParams = field(default_factory=TrackerParams)
    planner: PlannerParams = field(default_factory=PlannerParams)
    reaction_threshold: float = 0.05


@dataclass(frozen=True)
class ObstacleTruth:
    """Ground-truth footprint snapshot at one instant."""

    id: int
    kind: str  # box | cylinder
    center: Tuple[float, float]
    radius: float = 0.0
    size: Tuple[float, float] = (0.0, 0.0)
    yaw: float = 0.0
    height: float = 1.0
    dynamic: bool = False


@dataclass
class RunMetrics:
    min_dist: float
    cons_time: float
    reac_time: float
    speed_var: float
    collided: bool
    outcome: str = "goal"  # goal | collision | timeout
    min_audit_h: float = math.inf
    min_cbf_residual: float = math.inf
    ticks: int = 0

    def to_dict(self) -> dict:
        return {
            "min_dist": self.min_dist,
            "cons_time": self.cons_time,
            "reac_time": self.reac_time,
            "speed_var": self.speed_var,
            "collided": self.collided,
            "outcome": self.outcome,
            "min_audit_h": self.min_audit_h,
            "min_cbf_residual": self.min_cbf_residual,
            "ticks": self.ticks,
        }


@dataclass
class ScenarioRun:
    """Full episode log: tick records, metrics, solver telemetry."""

    scenario: Scenario
    planner_kind: str
    records: List[dict]
    metrics: RunMetrics
    telemetry: List[dict]
    grids: Optional[List[np.ndarray]] = None


@dataclass(frozen=True)
class WorldState:
    robot: RobotState
    t: float
    collided: bool = False


# ---- ground-truth geometry (independent of the perception stack) -------


def obstacle_truths(scenario: Scenario, t: float) -> List[ObstacleTruth]:
    out: List[ObstacleTruth] = []
    next_id = 0
    for ob in scenario.static_obstacles:
        out.append(
            ObstacleTruth(
                id=next_id,
                kind=ob.kind,
                center=ob.center,
                radius=ob.radius,
                size=ob.size,
                yaw=ob.yaw,
                height=ob.height,
                dynamic=False,
            )
        )
        next_id += 1
    for ob in scenario.dynamic_obstacles:
        out.append(
            ObstacleTruth(
                id=next_id,
                kind="cylinder",
                center=ob.motion.position_at(t),
                radius=ob.radius,
                height=ob.height,
                dynamic=True,
            )
        )
        next_id += 1
    return out


def footprint_distance(px: float, py: float, ob: ObstacleTruth) -> float:
    """Signed distance from a point to the obstacle footprint surface."""
    if ob.kind == "cylinder":
        return math.hypot(px - ob.center[0], py - ob.center[1]) - ob.radius
    c, s = math.cos(ob.yaw), math.sin(ob.yaw)
    rx, ry = px - ob.center[0], py - ob.center[1]
    lx = c * rx + s * ry
    ly = -s * rx + c * ry
    qx = abs(lx) - 0.5 * ob.size[0]
    qy = abs(ly) - 0.5 * ob.size[1]
    outside = math.hypot(max(qx, 0.0), max(qy, 0.0))
    inside = min(max(qx, qy), 0.0)
    return outside + inside


def truth_bounding_ellipse(ob: ObstacleTruth) -> Ellipse:
    """Minimum-area ellipse of the true footprint, used by the audit."""
    if ob.kind == "cylinder":
        return Ellipse(ob.center[0], ob.center[1], ob.radius, ob.radius, 0.0)
    a = 0.5 * ob.size[0] * math.sqrt(2.0)
    b = 0.5 * ob.size[1] * math.sqrt(2.0)
    return Ellipse(ob.center[0], ob.center[1], a, b, ob.yaw)


def step(scenario: Scenario, state: WorldState, control: ControlInput) -> WorldState:
    """Advance the world by one tick and flag footprint collisions."""
    robot = dynamics_step(state.robot, control, scenario.dt)
    t = state.t + scenario.dt
    collided = False
    for ob in obstacle_truths(scenario, t):
        if footprint_distance(robot.x, robot.y, ob) <= scenario.robot.radius:
            collided = True
            break
    return WorldState(robot=robot, t=t, collided=collided)


# ---- synthetic LiDAR ----------------------------------------------------


def _ray_circle(origin, dirs, center, radius) -> np.ndarray:
    m = np.asarray(center) - origin
    b = dirs @ m
    c = m @ m - radius * radius
    disc = b * b - c
    t = np.full(len(dirs), np.inf)
    ok = disc >= 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    t_near = b - sq
    t_far = b + sq
    hit_near = ok & (t_near > 0.0)
    hit_far = ok & ~ (t_near > 0.0) & (t_far > 0.0)
    t[hit_near] = t_near[hit_near]
    t[hit_far] = t_far[hit_far]
    return t


def _ray_box(origin, dirs, center, size, yaw) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    rot = np.array([[c, s], [-s, c]])
    o = rot @ (np.asarray(origin) - np.asarray(center))
    d = dirs @ rot.T
    half = 0.5 * np.asarray(size)
    t = np.full(len(dirs), np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        t1 = (-half - o) * inv
        t2 = (half - o) * inv
    t_near = np.nanmax(np.minimum(t1, t2), axis=1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=1)
    parallel_miss = (np.abs(d) < 1e-12) & (np.abs(o) > half)
    valid = (t_near <= t_far) & (t_far > 0.0) & ~parallel_miss.any(axis=1)
    entry = np.where(t_near > 0.0, t_near, t_far)
    t[valid] = entry[valid]
    return t


def raycast(
    truths: Sequence[ObstacleTruth],
    robot: RobotState,
    sensor: SensorConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """First-hit planar scan plus a coarse ground ring, as (n, 3) points.

    Hit points carry the obstacle height as z; ranges get Gaussian noise.
    Ground-ring points are exact and fill the elevation map floor.
    """
    origin = np.array([robot.x, robot.y])
    bearings = robot.heading + np.linspace(0.0, 2.0 * math.pi, sensor.beams, endpoint=False)
    dirs = np.column_stack([np.cos(bearings), np.sin(bearings)])

    best_t = np.full(sensor.beams, np.inf)
    best_z = np.zeros(sensor.beams)
    for ob in truths:
        if ob.kind == "cylinder":
            t = _ray_circle(origin, dirs, ob.center, ob.radius)
        else:
            t = _ray_box(origin, dirs, ob.center, ob.size, ob.yaw)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_z[closer] = ob.height

    hits = np.isfinite(best_t) & (best_t <= sensor.max_range)
    ranges = best_t[hits]
    if sensor.noise_sigma > 0.0 and len(ranges):
        ranges = ranges + rng.normal(0.0, sensor.noise_sigma, size=len(ranges))
        ranges = np.maximum(ranges, 1e-3)
    pts = origin + dirs[hits] * ranges[:, None]
    cloud = [np.column_stack([pts[:, 0], pts[:, 1], best_z[hits]])]

    ring_angles = robot.heading + np.linspace(
        0.0, 2.0 * math.pi, sensor.ground_ring_count, endpoint=False
    )
    ring_dirs = np.column_stack([np.cos(ring_angles), np.sin(ring_angles)])
    for radius in sensor.ground_ring_radii:
        ring = origin + ring_dirs * radius
        cloud.append(np.column_stack([ring[:, 0], ring[:, 1], np.zeros(len(ring))]))
    return np.vstack(cloud)


# ---- reference handling --------------------------------------------------


def _polyline_arclengths(waypoints: np.ndarray) -> np.ndarray:
    seg = np.linalg.norm(np.diff(waypoints, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def _point_at_arclength(waypoints: np.ndarray, cum: np.ndarray, s: float):
    s = min(max(s, 0.0), cum[-1])
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(waypoints) - 2)
    seg = cum[i + 1] - cum[i]
    f = (s - cum[i]) / seg if seg > 0 else 0.0
    p = waypoints[i] + f * (waypoints[i + 1] - waypoints[i])
    d = waypoints[i + 1] - waypoints[i]
    heading = math.atan2(d[1], d[0])
    return p, heading


def _project_arclength(waypoints: np.ndarray, cum: np.ndarray, p: np.ndarray) -> float:
    best_s, best_d = 0.0, math.inf
    for i in range(len(waypoints) - 1):
        a, b = waypoints[i], waypoints[i + 1]
        ab = b - a
        denom = float(ab @ ab)
        f = float(np.clip((p - a) @ ab / denom, 0.0, 1.0)) if denom > 0 else 0.0
        q = a + f * ab
        d = float(np.linalg.norm(p - q))
        if d < best_d:
            best_d = d
            best_s = cum[i] + f * math.sqrt(denom)
    return best_s


def reference_window(
    waypoints: Sequence[Sequence[float]],
    speed: float,
    robot: RobotState,
    horizon: int,
    dt: float,
) -> List[RobotState]:
    """Arc-length matched reference states over the horizon.

    The robot is projected onto the waypoint polyline and the reference
    advances at the nominal speed from there, clamping at the final
    waypoint.
    """
    wps = np.asarray(waypoints, dtype=float)
    cum = _polyline_arclengths(wps)
    s0 = _project_arclength(wps, cum, robot.position)
    out = []
    for k in range(horizon + 1):
        p, heading = _point_at_arclength(wps, cum, s0 + k * speed * dt)
        out.append(RobotState(p[0], p[1], heading))
    return out


# ---- closed loop ---------------------------------------------------------


def _in_local_map(ob: ObstacleTruth, robot: RobotState, map_cfg: MapConfig) -> bool:
    half = 0.5 * map_cfg.size
    return (
        abs(ob.center[0] - robot.x) <= half + ob.radius
        and abs(ob.center[1] - robot.y) <= half + ob.radius
    )


def _perceive(robot, truths, scenario, params, rng, associator, tracker, t):
    points = raycast(truths, robot, scenario.sensor, rng)
    grid = build_grid(points, robot, params.map)
    grid = obstacle_mask(grid, params.thresholds)
    cells = grid.masked_cell_centers()
    if len(cells):
        clusters, _ = dbscan(cells, params.cluster_eps, params.cluster_min_pts)
    else:
        clusters = []
    mbes = [
        min_bounding_ellipse(c.points, b_min=params.map.resolution) for c in clusters
    ]
    detections = associator.update(mbes, t)
    tracker.prune(associator.active_labels)
    tracker.update(detections)
    return grid, detections


def run(
    scenario: Scenario,
    planner_kind: str,
    params: Optional[RunParams] = None,
    shadow: bool = True,
    collect_grids: bool = False,
) -> ScenarioRun:
    """Execute the closed loop until goal, collision, or timeout.

    ``shadow`` adds an obstacle-free reference solve per tick, used for
    the reaction-time metric. Grid snapshots are collected only on
    request (they dominate log size).
    """
    if planner_kind not in PLANNER_KINDS:
        raise ValueError(f"unknown planner kind {planner_kind!r}; valid: {PLANNER_KINDS}")
    params = params or RunParams()
    if not math.isclose(params.planner.dt, scenario.dt) or not math.isclose(
        params.tracker.dt, scenario.dt
    ):
        raise ValueError("planner and tracker periods must match the scenario tick")
    rng = np.random.default_rng(scenario.seed)
    associator = FrameAssociator(params.association)
    tracker = ObstacleTracker(params.tracker)
    horizon = params.planner.horizon
    goal = np.array(scenario.robot.goal)

    world = WorldState(robot=RobotState(*scenario.robot.start), t=0.0)
    warm: Optional[np.ndarray] = None
    warm_free: Optional[np.ndarray] = None
    u_prev = np.zeros(2)  # robot starts at rest

    records: List[dict] = []
    telemetry: List[dict] = []
    grids: List[np.ndarray] = []

    min_dist = math.inf
    min_audit = math.inf
    min_resid = math.inf
    entry_tick: Optional[int] = None
    reaction_tick: Optional[int] = None
    avoid_speeds: List[float] = []
    outcome = "timeout"
    cons_time = math.nan

    n_ticks = int(round(scenario.duration / scenario.dt))
    for tick in range(n_ticks):
        t = world.t
        robot = world.robot
        truths = obstacle_truths(scenario, t)

        wall_start = time.perf_counter()
        grid, detections = _perceive(
            robot, truths, scenario, params, rng, associator, tracker, t
        )
        predictions = tracker.predict_all(horizon)
        confirmed = set(tracker.confirmed_labels)
        planner_dets = [d for d in detections if d.label in confirmed]
        histories = {lab: tracker.center_history(lab) for lab in confirmed}
        reference = reference_window(
            scenario.reference.waypoints,
            scenario.reference.speed,
            robot,
            horizon,
            params.planner.dt,
        )
        sol = plan_variant(
            planner_kind,
            robot,
            reference,
            predictions,
            planner_dets,
            histories,
            params.planner,
            warm,
            u_prev=u_prev,
        )
        wall_ms = (time.perf_counter() - wall_start) * 1000.0
        warm = shift_warm_start(sol)

        u_free = None
        du_norm = None
        if shadow:
            sol_free = solve(
                robot, reference, [], params.planner, warm_free, u_prev=u_prev
            )
            warm_free = shift_warm_start(sol_free)
            u_free = sol_free.first_control
            du = sol.controls[0] - sol_free.controls[0]
            du_norm = float(np.linalg.norm(du))

        u = sol.first_control

        clearances = [
            footprint_distance(robot.x, robot.y, ob) - scenario.robot.radius
            for ob in truths
        ]
        audit_h = [
            barrier(robot, truth_bounding_ellipse(ob), params.planner.d_safe).h
            for ob in truths
        ]
        any_dyn = any(
            ob.dynamic and _in_local_map(ob, robot, params.map) for ob in truths
        )
        if clearances:
            min_dist = min(min_dist, min(clearances))
            min_audit = min(min_audit, min(audit_h))
        min_resid = min(min_resid, sol.min_residual)

        if any_dyn:
            avoid_speeds.append(u.v)
            if entry_tick is None:
                entry_tick = tick
        if (
            entry_tick is not None
            and reaction_tick is None
            and du_norm is not None
            and du_norm > params.reaction_threshold
        ):
            reaction_tick = tick

        records.append(
            {
                "t": round(t, 9),
                "robot": [robot.x, robot.y, robot.heading],
                "u": [u.v, u.omega],
                "u_free": [u_free.v, u_free.omega] if u_free else None,
                "du_norm": du_norm,
                "status": sol.status,
                "cost": sol.cost,
                "iterations": sol.iterations,
                "min_cbf_residual": sol.min_residual,
                "obstacles": [
                    {
                        "id": ob.id,
                        "kind": ob.kind,
                        "center": list(ob.center),
                        "radius": ob.radius,
                        "dynamic": ob.dynamic,
                    }
                    for ob in truths
                ],
                "detections": [
                    {"label": d.label, "ellipse": d.ellipse.to_array().tolist()}
                    for d in detections
                ],
                "predictions": [
                    {
                        "label": p.label,
                        "ellipses": [e.to_array().tolist() for e in p.ellipses],
                        "radii": list(p.radii),
                    }
                    for p in predictions
                ],
                "audit_h": audit_h,
                "clearances": clearances,
                "any_dynamic_in_map": any_dyn,
            }
        )
        telemetry.append(
            {
                "t": round(t, 9),
                "wall_ms": wall_ms,
                "iterations": sol.iterations,
                "cost": sol.cost,
                "min_cbf_residual": sol.min_residual,
                "status": sol.status,
            }
        )
        if collect_grids:
            grids.append(np.asarray(grid.obstacle_mask, dtype=np.uint8))

        u_prev = np.array([u.v, u.omega])
        world = step(scenario, world, u)
        next_clear = min(
            (
                footprint_distance(world.robot.x, world.robot.y, ob)
                - scenario.robot.radius
                for ob in obstacle_truths(scenario, world.t)
            ),
            default=math.inf,
        )
        min_dist = min(min_dist, next_clear)
        if world.collided:
            outcome = "collision"
            break
        if float(np.linalg.norm(world.robot.position - goal)) <= scenario.robot.goal_tolerance:
            outcome = "goal"
            cons_time = world.t
            break

    collided = outcome == "collision"
    reac_time = (
        (reaction_tick - entry_tick) * scenario.dt
        if entry_tick is not None and reaction_tick is not None
        else math.nan
    )
    speed_var = float(np.var(avoid_speeds)) if avoid_speeds else 0.0
    metrics = RunMetrics(
        min_dist=max(min_dist, 0.0) if math.isfinite(min_dist) else math.inf,
        cons_time=cons_time,
        reac_time=reac_time,
        speed_var=speed_var,
        collided=collided,
        outcome=outcome,
        min_audit_h=min_audit,
        min_cbf_residual=min_resid,
        ticks=len(records),
    )
    return ScenarioRun(
        scenario=scenario,
        planner_kind=planner_kind,
        records=records,
        metrics=metrics,
        telemetry=telemetry,
        grids=grids if collect_grids else None,
    )


# ---- confidence validation ----------------------------------------------


def run_confidence_probe(
    frames: int = 250,
    seed: int = 0,
    cylinder_radius: float = 0.5,
    motion=None,
    vantage=None,
    params: Optional[RunParams] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-frame (estimated, true) position-confidence series.

    A cylinder is observed with noisy ray-cast clouds from an operating
    robot (the ``vantage`` script moves the sensor origin, as it would
    during navigation); per frame the bounding ellipse feeds the
    shape-change indicator while the ground truth feeds the true
    position indicator over the same backward window. Used to validate
    the confidence estimator against simulation truth.
    """
    from dcbfnav.scenario import MotionScript

    params = params or RunParams()
    motion = motion or MotionScript(kind="const_velocity", start=(3.5, 0.0), velocity=(0.0, 0.0))
    vantage = vantage or MotionScript(
        kind="waypoints", points=((0.0, 0.0), (0.0, 3.0), (0.0, -3.0)), speed=0.4, loop=True
    )
    rng = np.random.default_rng(seed)
    sensor = SensorConfig()
    window = params.tracker.window

    meas_hist: List[Ellipse] = []
    true_hist: List[Tuple[float, float]] = []
    xi_hat_series: List[float] = []
    xi_true_series: List[float] = []

    for k in range(frames):
        t = k * params.tracker.dt
        rx, ry = vantage.position_at(t)
        robot = RobotState(rx, ry, 0.0)
        center = motion.position_at(t)
        truth = [
            ObstacleTruth(
                id=0, kind="cylinder", center=center, radius=cylinder_radius,
                height=1.2, dynamic=True,
            )
        ]
        points = raycast(truth, robot, sensor, rng)
        grid = build_grid(points, robot, params.map)
        grid = obstacle_mask(grid, params.thresholds)
        cells = grid.masked_cell_centers()
        if not len(cells):
            continue
        clusters, _ = dbscan(cells, params.cluster_eps, params.cluster_min_pts)
        if not clusters:
            continue
        biggest = max(clusters, key=lambda c: len(c.points))
        mbe = min_bounding_ellipse(biggest.points, b_min=params.map.resolution)
        meas_hist.append(mbe)
        true_hist.append(center)
        if len(meas_hist) >= window:
            xi_eta, xi_hat = confidence(meas_hist[-window:], params.tracker)
            xi_true = true_position_confidence(
                [e.center for e in meas_hist[-window:]], true_hist[-window:]
            )
            xi_hat_series.append(xi_hat)
            xi_true_series.append(xi_true)
    return np.asarray(xi_hat_series), np.asarray(xi_true_series)
