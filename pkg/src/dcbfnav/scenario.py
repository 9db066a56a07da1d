"""Scenario configuration: world, obstacles, motion scripts, sensor.

Scenario files are human-editable YAML with nested keys and arrays; a
parsed scenario round-trips through ``to_dict``/``from_dict`` without
loss, which is what keeps sweep configs reproducible. All randomness in
an episode derives from the single scenario seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple

import numpy as np
import yaml

MOTION_KINDS = ("const_velocity", "waypoints", "sinusoidal")


def _tup(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class WorldBounds:
    x_min: float = -5.0
    x_max: float = 25.0
    y_min: float = -10.0
    y_max: float = 10.0

    def __post_init__(self) -> None:
        if self.x_min >= self.x_max or self.y_min >= self.y_max:
            raise ValueError("world bounds must be non-empty")

    def contains(self, x: float, y: float) -> bool:
        return self.x_min <= x <= self.x_max and self.y_min <= y <= self.y_max


@dataclass(frozen=True)
class RobotConfig:
    start: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    goal: Tuple[float, float] = (20.0, 0.0)
    radius: float = 0.3
    goal_tolerance: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", _tup(self.start))
        object.__setattr__(self, "goal", _tup(self.goal))
        if self.radius <= 0.0 or self.goal_tolerance <= 0.0:
            raise ValueError("robot radius and goal tolerance must be positive")


@dataclass(frozen=True)
class ReferenceConfig:
    waypoints: Tuple[Tuple[float, float], ...] = ((0.0, 0.0), (20.0, 0.0))
    speed: float = 1.0

    def __post_init__(self) -> None:
        wps = tuple(_tup(w) for w in self.waypoints)
        if len(wps) < 2:
            raise ValueError("reference needs at least two waypoints")
        object.__setattr__(self, "waypoints", wps)
        if self.speed <= 0.0:
            raise ValueError("reference speed must be positive")


@dataclass(frozen=True)
class SensorConfig:
    beams: int = 360
    max_range: float = 15.0
    noise_sigma: float = 0.02
    ground_ring_radii: Tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    ground_ring_count: int = 24

    def __post_init__(self) -> None:
        if self.beams < 1:
            raise ValueError("need at least one beam")
        if self.max_range <= 0.0 or self.noise_sigma < 0.0:
            raise ValueError("invalid sensor config")
        object.__setattr__(self, "ground_ring_radii", _tup(self.ground_ring_radii))


@dataclass(frozen=True)
class MotionScript:
    """Scripted obstacle motion, a pure function of time.

    const_velocity: start + velocity * tau
    waypoints:      polyline traversal at constant speed (optionally looped)
    sinusoidal:     straight drift along ``direction`` with lateral sine
    where tau = max(0, t - delay).
    """

    kind: str = "const_velocity"
    start: Tuple[float, float] = (0.0, 0.0)
    velocity: Tuple[float, float] = (0.0, 0.0)
    points: Tuple[Tuple[float, float], ...] = ()
    speed: float = 0.0
    direction: float = 0.0
    amplitude: float = 0.0
    period: float = 1.0
    delay: float = 0.0
    loop: bool = False

    def __post_init__(self) -> None:
        if self.kind not in MOTION_KINDS:
            raise ValueError(f"unknown motion kind {self.kind!r}; valid: {MOTION_KINDS}")
        object.__setattr__(self, "start", _tup(self.start))
        object.__setattr__(self, "velocity", _tup(self.velocity))
        object.__setattr__(self, "points", tuple(_tup(p) for p in self.points))
        if self.speed < 0.0:
            raise ValueError("script speed must be non-negative")
        if self.kind == "waypoints" and len(self.points) < 2:
            raise ValueError("waypoint script needs at least two points")
        if self.kind == "sinusoidal" and self.period <= 0.0:
            raise ValueError("sinusoidal script needs a positive period")

    def position_at(self, t: float) -> Tuple[float, float]:
        tau = max(0.0, t - self.delay)
        if self.kind == "const_velocity":
            return (
                self.start[0] + self.velocity[0] * tau,
                self.start[1] + self.velocity[1] * tau,
            )
        if self.kind == "sinusoidal":
            c, s = math.cos(self.direction), math.sin(self.direction)
            along = self.speed * tau
            lateral = self.amplitude * math.sin(2.0 * math.pi * tau / self.period)
            return (
                self.start[0] + c * along - s * lateral,
                self.start[1] + s * along + c * lateral,
            )
        # waypoints
        pts = self.points
        seg_lengths = [
            math.hypot(p1[0] - p0[0], p1[1] - p0[1])
            for p0, p1 in zip(pts, pts[1:])
        ]
        total = sum(seg_lengths)
        if total <= 0.0 or self.speed == 0.0:
            return pts[0]
        dist = self.speed * tau
        if self.loop:
            dist = math.fmod(dist, total)
        elif dist >= total:
            return pts[-1]
        for (p0, p1), seg in zip(zip(pts, pts[1:]), seg_lengths):
            if dist <= seg:
                f = dist / seg if seg > 0 else 0.0
                return (p0[0] + f * (p1[0] - p0[0]), p0[1] + f * (p1[1] - p0[1]))
            dist -= seg
        return pts[-1]


@dataclass(frozen=True)
class StaticObstacle:
    kind: str = "box"  # box | cylinder
    center: Tuple[float, float] = (0.0, 0.0)
    size: Tuple[float, float] = (1.0, 1.0)  # box full extents
    yaw: float = 0.0
    radius: float = 0.5  # cylinder
    height: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("box", "cylinder"):
            raise ValueError("static obstacle kind must be 'box' or 'cylinder'")
        object.__setattr__(self, "center", _tup(self.center))
        object.__setattr__(self, "size", _tup(self.size))
        if self.height <= 0.0:
            raise ValueError("obstacle height must be positive")


@dataclass(frozen=True)
class DynamicObstacle:
    radius: float = 0.3
    height: float = 1.2
    motion: MotionScript = field(default_factory=MotionScript)

    def __post_init__(self) -> None:
        if self.radius <= 0.0 or self.height <= 0.0:
            raise ValueError("dynamic obstacle radius and height must be positive")


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    seed: int = 0
    dt: float = 0.1
    duration: float = 60.0
    world: WorldBounds = field(default_factory=WorldBounds)
    robot: RobotConfig = field(default_factory=RobotConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    static_obstacles: Tuple[StaticObstacle, ...] = ()
    dynamic_obstacles: Tuple[DynamicObstacle, ...] = ()

    def __post_init__(self) -> None:
        if self.dt <= 0.0 or self.duration <= 0.0:
            raise ValueError("dt and duration must be positive")
        sx, sy, _ = self.robot.start
        gx, gy = self.robot.goal
        if not self.world.contains(sx, sy):
            raise ValueError("robot start outside world bounds")
        if not self.world.contains(gx, gy):
            raise ValueError("robot goal outside world bounds")
        object.__setattr__(self, "static_obstacles", tuple(self.static_obstacles))
        object.__setattr__(self, "dynamic_obstacles", tuple(self.dynamic_obstacles))

    # ---- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "dt": self.dt,
            "duration": self.duration,
            "world": {
                "x_min": self.world.x_min,
                "x_max": self.world.x_max,
                "y_min": self.world.y_min,
                "y_max": self.world.y_max,
            },
            "robot": {
                "start": list(self.robot.start),
                "goal": list(self.robot.goal),
                "radius": self.robot.radius,
                "goal_tolerance": self.robot.goal_tolerance,
            },
            "reference": {
                "waypoints": [list(w) for w in self.reference.waypoints],
                "speed": self.reference.speed,
            },
            "sensor": {
                "beams": self.sensor.beams,
                "max_range": self.sensor.max_range,
                "noise_sigma": self.sensor.noise_sigma,
                "ground_ring_radii": list(self.sensor.ground_ring_radii),
                "ground_ring_count": self.sensor.ground_ring_count,
            },
            "static_obstacles": [
                {
                    "kind": ob.kind,
                    "center": list(ob.center),
                    "size": list(ob.size),
                    "yaw": ob.yaw,
                    "radius": ob.radius,
                    "height": ob.height,
                }
                for ob in self.static_obstacles
            ],
            "dynamic_obstacles": [
                {
                    "radius": ob.radius,
                    "height": ob.height,
                    "motion": _motion_to_dict(ob.motion),
                }
                for ob in self.dynamic_obstacles
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(
            name=data.get("name", "scenario"),
            seed=int(data.get("seed", 0)),
            dt=float(data.get("dt", 0.1)),
            duration=float(data.get("duration", 60.0)),
            world=WorldBounds(**data.get("world", {})),
            robot=RobotConfig(**data.get("robot", {})),
            reference=ReferenceConfig(**data.get("reference", {})),
            sensor=SensorConfig(**data.get("sensor", {})),
            static_obstacles=tuple(
                StaticObstacle(**ob) for ob in data.get("static_obstacles", [])
            ),
            dynamic_obstacles=tuple(
                DynamicObstacle(
                    radius=float(ob.get("radius", 0.3)),
                    height=float(ob.get("height", 1.2)),
                    motion=MotionScript(**ob.get("motion", {})),
                )
                for ob in data.get("dynamic_obstacles", [])
            ),
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "Scenario":
        data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ValueError("scenario file must hold a mapping")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_yaml(Path(path).read_text())

    def save(self, path) -> None:
        Path(path).write_text(self.to_yaml())


def _motion_to_dict(m: MotionScript) -> dict:
    out = {"kind": m.kind, "delay": m.delay}
    if m.kind == "const_velocity":
        out.update(start=list(m.start), velocity=list(m.velocity))
    elif m.kind == "waypoints":
        out.update(points=[list(p) for p in m.points], speed=m.speed, loop=m.loop)
    else:
        out.update(
            start=list(m.start),
            direction=m.direction,
            speed=m.speed,
            amplitude=m.amplitude,
            period=m.period,
        )
    return out


def builtin_scenario_path(name: str) -> Path:
    """Path of a scenario file shipped with the package."""
    path = Path(__file__).parent / "scenarios" / f"{name}.yaml"
    if not path.exists():
        available = sorted(p.stem for p in path.parent.glob("*.yaml"))
        raise FileNotFoundError(f"no builtin scenario {name!r}; available: {available}")
    return path
