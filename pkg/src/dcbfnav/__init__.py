"""Perception-to-control pipeline for navigation among moving obstacles.

Obstacles are detected on a robot-centered elevation grid, enclosed in
minimum bounding ellipses, tracked with an uncertainty-adaptive Kalman
filter, and avoided by a receding-horizon controller with discrete-time
dynamic barrier constraints. A deterministic 2D simulator and metrics
harness drive the closed loop.
"""

from dcbfnav.geometry import ControlInput, Ellipse, RobotState

__version__ = "0.1.0"

__all__ = ["Ellipse", "RobotState", "ControlInput", "__version__"]
