import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcbfnav.geometry import (
    Ellipse,
    Pose2Trajectory,
    RobotState,
    point_in_ellipse,
    ray_ellipse_distance,
    wrap_angle,
    wrap_orientation,
)
from oracles import point_in_rotated_ellipse, ray_hit_distance


class TestEllipse:
    def test_canonical_swaps_axes(self):
        e = Ellipse(0, 0, 1.0, 2.0, 0.0)
        assert e.a == 2.0 and e.b == 1.0
        assert e.theta == pytest.approx(-math.pi / 2)

    def test_theta_wrapped(self):
        e = Ellipse(0, 0, 2, 1, math.pi)
        assert -math.pi / 2 <= e.theta < math.pi / 2

    def test_rejects_nonpositive_axes(self):
        with pytest.raises(ValueError):
            Ellipse(0, 0, 1, 0, 0)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Ellipse(math.nan, 0, 1, 1, 0)

    def test_inflated_grows_axes(self):
        e = Ellipse(1, 2, 2, 1, 0.3).inflated(0.5)
        assert e.a == pytest.approx(2.5) and e.b == pytest.approx(1.5)

    def test_boundary_points_on_boundary(self):
        e = Ellipse(1.0, -2.0, 2.0, 0.7, 0.4)
        for p in e.boundary_points(32):
            assert point_in_ellipse(e, p, tol=1e-9)
            assert not point_in_ellipse(e, p, tol=-1e-6)


class TestRayEllipseDistance:
    def test_major_axis(self):
        assert ray_ellipse_distance(Ellipse(0, 0, 2, 1, 0), (5, 0)) == pytest.approx(2.0)

    def test_minor_axis(self):
        assert ray_ellipse_distance(Ellipse(0, 0, 2, 1, 0), (0, 5)) == pytest.approx(1.0)

    def test_diagonal_against_bisection_oracle(self):
        e = Ellipse(0, 0, 2, 1, 0)
        expected = ray_hit_distance((0, 0, 2, 1, 0), (5, 5))
        got = ray_ellipse_distance(e, (5, 5))
        assert got == pytest.approx(1.264911, abs=1e-6)
        assert got == pytest.approx(expected, abs=1e-9)

    def test_degenerate_ray_raises(self):
        with pytest.raises(ValueError, match="degenerate ray"):
            ray_ellipse_distance(Ellipse(1, 1, 2, 1, 0), (1, 1))

    def test_matches_oracle_on_random_cases(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            e = Ellipse(
                rng.uniform(-5, 5),
                rng.uniform(-5, 5),
                rng.uniform(0.5, 4.0),
                rng.uniform(0.1, 0.5),
                rng.uniform(-math.pi, math.pi),
            )
            ang = rng.uniform(0, 2 * math.pi)
            radius = rng.uniform(0.2, 10.0)
            p = (e.cx + radius * math.cos(ang), e.cy + radius * math.sin(ang))
            expected = ray_hit_distance(
                (e.cx, e.cy, e.a, e.b, e.theta), p
            )
            assert ray_ellipse_distance(e, p) == pytest.approx(expected, abs=1e-9)

    def test_equals_tan_form_away_from_singularity(self):
        e = Ellipse(0, 0, 3, 1.2, 0.0)
        for delta in np.linspace(-math.pi / 2 + 1e-3, math.pi / 2 - 1e-3, 500):
            p = (math.cos(delta), math.sin(delta))
            t = math.tan(delta)
            tan_form = math.sqrt(
                e.a**2 * e.b**2 * (1 + t * t) / (e.b**2 + e.a**2 * t * t)
            )
            assert abs(ray_ellipse_distance(e, p) - tan_form) < 1e-9

    @given(
        a=st.floats(0.2, 5.0),
        ratio=st.floats(0.05, 1.0),
        theta=st.floats(-math.pi, math.pi),
        ang=st.floats(0, 2 * math.pi),
        radius=st.floats(0.1, 20.0),
    )
    @settings(max_examples=200, deadline=None)
    def test_bounded_by_axes(self, a, ratio, theta, ang, radius):
        e = Ellipse(0, 0, a, max(a * ratio, 1e-3), theta)
        p = (radius * math.cos(ang), radius * math.sin(ang))
        l = ray_ellipse_distance(e, p)
        assert e.b - 1e-12 <= l <= e.a + 1e-12

    def test_rigid_transform_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            e = Ellipse(
                rng.uniform(-2, 2), rng.uniform(-2, 2),
                rng.uniform(0.5, 3), rng.uniform(0.1, 0.5),
                rng.uniform(-1, 1),
            )
            p = rng.uniform(-6, 6, size=2)
            phi = rng.uniform(-math.pi, math.pi)
            t = rng.uniform(-10, 10, size=2)
            rot = np.array([[math.cos(phi), -math.sin(phi)], [math.sin(phi), math.cos(phi)]])
            c2 = rot @ e.center + t
            e2 = Ellipse(c2[0], c2[1], e.a, e.b, e.theta + phi)
            p2 = rot @ p + t
            if np.linalg.norm(p - e.center) < 1e-6:
                continue
            assert ray_ellipse_distance(e, p) == pytest.approx(
                ray_ellipse_distance(e2, p2), abs=1e-9
            )


class TestPointInEllipse:
    def test_center_of_unit_circle(self):
        assert point_in_ellipse(Ellipse(0, 0, 1, 1, 0), (0, 0))

    def test_vertex_on_boundary(self):
        assert point_in_ellipse(Ellipse(0, 0, 2, 1, 0), (2, 0))

    def test_rotation_swaps_axes(self):
        e = Ellipse(0, 0, 2, 1, math.pi / 2)
        assert not point_in_ellipse(e, (1.5, 0))
        assert point_in_rotated_ellipse((0, 0, 2, 1, math.pi / 2), (1.5, 0)) is False

    def test_agrees_with_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            params = (
                rng.uniform(-2, 2), rng.uniform(-2, 2),
                rng.uniform(0.5, 3), rng.uniform(0.1, 0.5),
                rng.uniform(-2, 2),
            )
            e = Ellipse(*params)
            p = rng.uniform(-4, 4, size=2)
            assert point_in_ellipse(e, p, tol=0.0) == point_in_rotated_ellipse(
                (e.cx, e.cy, e.a, e.b, e.theta), p
            )


class TestAngles:
    @given(st.floats(-100, 100))
    @settings(max_examples=200, deadline=None)
    def test_wrap_angle_range(self, x):
        w = wrap_angle(x)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(x), abs_tol=1e-9)
        assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)

    @given(st.floats(-100, 100))
    @settings(max_examples=200, deadline=None)
    def test_wrap_orientation_range(self, x):
        w = wrap_orientation(x)
        assert -math.pi / 2 <= w < math.pi / 2
        assert math.isclose(math.tan(w), math.tan(x), abs_tol=1e-6) or abs(
            abs(x % math.pi) - math.pi / 2
        ) < 1e-3


class TestStates:
    def test_heading_wrapped(self):
        s = RobotState(0, 0, 3 * math.pi)
        assert s.heading == pytest.approx(math.pi)

    def test_trajectory_monotonic_times(self):
        with pytest.raises(ValueError):
            Pose2Trajectory((0.0, 0.0), (RobotState(0, 0, 0), RobotState(1, 0, 0)))
        tr = Pose2Trajectory((0.0,), (RobotState(0, 0, 0),))
        tr2 = tr.extended(0.1, RobotState(0.1, 0, 0))
        assert len(tr2) == 2
