"""Shared 2D geometric primitives.

Rotated ellipses are the universal obstacle currency of the pipeline:
detections, tracked estimates and predicted obstacles are all ellipses.
The center-ray distance defined here is consumed both by the tracker's
uncertainty inflation and by the planner's barrier constraints.

All angles are radians. Heading angles live in (-pi, pi], ellipse
orientations in [-pi/2, pi/2) (orientation has period pi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(angle: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def wrap_orientation(angle: float) -> float:
    """Wrap an ellipse orientation to [-pi/2, pi/2)."""
    a = math.fmod(angle + 0.5 * math.pi, math.pi)
    if a < 0.0:
        a += math.pi
    return a - 0.5 * math.pi


@dataclass(frozen=True)
class Ellipse:
    """Rotated ellipse (cx, cy, a, b, theta).

    Canonical form is enforced at construction: a >= b > 0 (axes are
    swapped and theta rotated by pi/2 when violated) and theta is wrapped
    to [-pi/2, pi/2). Instances are immutable values.
    """

    cx: float
    cy: float
    a: float
    b: float
    theta: float

    def __post_init__(self) -> None:
        cx, cy = float(self.cx), float(self.cy)
        a, b, theta = float(self.a), float(self.b), float(self.theta)
        if not all(map(math.isfinite, (cx, cy, a, b, theta))):
            raise ValueError("ellipse parameters must be finite")
        if a < b:
            a, b = b, a
            theta += 0.5 * math.pi
        if b <= 0.0:
            raise ValueError(f"ellipse axes must be positive (a={a}, b={b})")
        object.__setattr__(self, "cx", cx)
        object.__setattr__(self, "cy", cy)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "theta", wrap_orientation(theta))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    @property
    def shape(self) -> np.ndarray:
        """Shape vector [a, b, theta]."""
        return np.array([self.a, self.b, self.theta])

    @property
    def area(self) -> float:
        return math.pi * self.a * self.b

    def to_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.a, self.b, self.theta])

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "Ellipse":
        cx, cy, a, b, theta = (float(v) for v in arr)
        return cls(cx, cy, a, b, theta)

    def inflated(self, margin: float) -> "Ellipse":
        """Ellipse with both axes grown by ``margin`` (same center/rotation)."""
        if margin < 0.0:
            raise ValueError("inflation margin must be non-negative")
        return Ellipse(self.cx, self.cy, self.a + margin, self.b + margin, self.theta)

    def boundary_points(self, n: int = 64) -> np.ndarray:
        """``n`` points on the boundary, parameterized by eccentric anomaly."""
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        ct, st = math.cos(self.theta), math.sin(self.theta)
        ex = self.a * np.cos(t)
        ey = self.b * np.sin(t)
        return np.column_stack(
            [self.cx + ct * ex - st * ey, self.cy + st * ex + ct * ey]
        )


def ray_ellipse_distance(e: Ellipse, p: Sequence[float]) -> float:
    """Distance from the ellipse center to its periphery along the center->p ray.

    Uses the singularity-free cos/sin form

        l = a*b / sqrt(b^2 cos^2(delta) + a^2 sin^2(delta))

    where delta is the angle between the center->p ray and the major axis.
    This is algebraically identical to the tan-based form wherever
    tan(delta) is finite, and is additionally defined at delta = +-pi/2.

    Raises ValueError when p coincides with the center (degenerate ray).
    """
    rx = float(p[0]) - e.cx
    ry = float(p[1]) - e.cy
    norm = math.hypot(rx, ry)
    if norm < 1e-12:
        raise ValueError("degenerate ray: point coincides with ellipse center")
    ct, st = math.cos(e.theta), math.sin(e.theta)
    cos_d = (rx * ct + ry * st) / norm
    sin_d = (-rx * st + ry * ct) / norm
    return e.a * e.b / math.sqrt(e.b * e.b * cos_d * cos_d + e.a * e.a * sin_d * sin_d)


def point_in_ellipse(e: Ellipse, p: Sequence[float], tol: float = 1e-9) -> bool:
    """True iff p satisfies the implicit inequality of the rotated ellipse.

    ``tol`` is the boundary tolerance on the implicit form value.
    """
    rx = float(p[0]) - e.cx
    ry = float(p[1]) - e.cy
    ct, st = math.cos(e.theta), math.sin(e.theta)
    ux = (rx * ct + ry * st) / e.a
    uy = (-rx * st + ry * ct) / e.b
    return ux * ux + uy * uy <= 1.0 + tol


@dataclass(frozen=True)
class RobotState:
    """Planar robot pose (x, y, heading); heading wrapped to (-pi, pi]."""

    x: float
    y: float
    heading: float

    def __post_init__(self) -> None:
        x, y, h = float(self.x), float(self.y), float(self.heading)
        if not all(map(math.isfinite, (x, y, h))):
            raise ValueError("robot state must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "heading", wrap_angle(h))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.heading])

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "RobotState":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class ControlInput:
    """Differential-drive command: linear speed v and angular rate omega."""

    v: float
    omega: float

    def to_array(self) -> np.ndarray:
        return np.array([self.v, self.omega])


@dataclass(frozen=True)
class Pose2Trajectory:
    """Time-indexed pose sequence with strictly increasing timestamps."""

    times: Tuple[float, ...]
    states: Tuple[RobotState, ...]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        for t0, t1 in zip(self.times, self.times[1:]):
            if not t1 > t0:
                raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(zip(self.times, self.states))

    def extended(self, t: float, state: RobotState) -> "Pose2Trajectory":
        return Pose2Trajectory(self.times + (float(t),), self.states + (state,))
