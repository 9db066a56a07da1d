"""Obstacle state estimation and forward prediction.

Each labeled obstacle is tracked by a 9-state linear Kalman filter over
[x, y, vx, vy, ax, ay, a, b, theta]: constant-acceleration kinematics on
the position block, identity dynamics on the ellipse shape block. The
position measurement variance adapts to a shape-change confidence
estimate so a fluttering bounding ellipse pulls the filter less.

Predicted ellipses over the planning horizon are inflated by an
uncertainty radius derived from the predicted covariance.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Sequence, Tuple

import numpy as np

from dcbfnav.geometry import Ellipse, wrap_orientation
from dcbfnav.perception import LabeledEllipse

STATE_DIM = 9
MEAS_DIM = 5

# indices into the state vector
IDX_POS = slice(0, 2)
IDX_VEL = slice(2, 4)
IDX_ACC = slice(4, 6)
IDX_SHAPE = slice(6, 9)


def transition_matrix(dt: float) -> np.ndarray:
    """Constant-acceleration kinematics + identity on the shape block."""
    a = np.eye(STATE_DIM)
    a[0, 2] = a[1, 3] = dt
    a[2, 4] = a[3, 5] = dt
    a[0, 4] = a[1, 5] = 0.5 * dt * dt
    return a


def measurement_matrix() -> np.ndarray:
    """Selects [cx, cy, a, b, theta] from the 9-state vector."""
    h = np.zeros((MEAS_DIM, STATE_DIM))
    h[0, 0] = h[1, 1] = 1.0
    h[2, 6] = h[3, 7] = h[4, 8] = 1.0
    return h


def _default_process_noise() -> np.ndarray:
    return np.diag([1e-4, 1e-4, 1e-4, 1e-4, 5e-4, 5e-4, 1e-4, 1e-4, 1e-4])


def _default_init_cov() -> np.ndarray:
    return np.diag([1.0, 1.0, 4.0, 4.0, 4.0, 4.0, 0.25, 0.25, 0.25])


@dataclass
class TrackerParams:
    """Filter period, noise model, and confidence-adaptation coefficients."""

    dt: float = 0.1
    process_noise: np.ndarray = field(default_factory=_default_process_noise)
    init_cov: np.ndarray = field(default_factory=_default_init_cov)
    r_p_min: float = 0.02
    r_p_max: float = 0.5
    r_shape: float = 0.05
    xi_min_crit: float = 1e-4
    xi_max_crit: float = 0.5
    kappa: float = 5.5
    gamma_pow: float = 1.3
    window: int = 10
    sigma_mult: float = 2.0
    inflate_mode: str = "conservative"
    radius_cap: float = 0.3
    min_updates: int = 3

    def __post_init__(self) -> None:
        if not (0.0 < self.r_p_min <= self.r_p_max):
            raise ValueError("need 0 < r_p_min <= r_p_max")
        if not (0.0 < self.xi_min_crit < self.xi_max_crit):
            raise ValueError("need 0 < xi_min_crit < xi_max_crit")
        if self.window < 2:
            raise ValueError("confidence window must be at least 2")
        if self.inflate_mode not in ("root", "conservative"):
            raise ValueError("inflate_mode must be 'root' or 'conservative'")
        self.process_noise = np.asarray(self.process_noise, dtype=float)
        self.init_cov = np.asarray(self.init_cov, dtype=float)
        if self.process_noise.shape != (STATE_DIM, STATE_DIM):
            raise ValueError("process noise must be 9x9")


@dataclass
class TrackState:
    """Filter mean [x, y, vx, vy, ax, ay, a, b, theta] and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=float).reshape(STATE_DIM)
        self.cov = np.asarray(self.cov, dtype=float).reshape(STATE_DIM, STATE_DIM)
        if not np.allclose(self.cov, self.cov.T, atol=1e-9):
            raise ValueError("covariance must be symmetric")
        if np.any(np.diag(self.cov) < -1e-12):
            raise ValueError("covariance diagonal must be non-negative")

    def ellipse(self, b_min: float = 1e-3) -> Ellipse:
        a, b, theta = self.mean[IDX_SHAPE]
        b = max(abs(b), b_min)
        a = max(abs(a), b)
        return Ellipse(self.mean[0], self.mean[1], a, b, theta)

    @classmethod
    def from_measurement(cls, meas: Ellipse, params: TrackerParams) -> "TrackState":
        mean = np.zeros(STATE_DIM)
        mean[0], mean[1] = meas.cx, meas.cy
        mean[IDX_SHAPE] = meas.shape
        return cls(mean=mean, cov=params.init_cov.copy())


@dataclass
class PredictedObstacle:
    """Inflated ellipse chain over the horizon, k = 0 (now) .. N.

    ``radii[k]`` is the uncertainty radius used to inflate step k; it is
    non-decreasing in k. ``estimated`` holds the un-inflated ellipses.
    """

    label: int
    ellipses: Tuple[Ellipse, ...]
    radii: Tuple[float, ...]
    estimated: Tuple[Ellipse, ...]


def kf_predict(state: TrackState, params: TrackerParams) -> TrackState:
    a = transition_matrix(params.dt)
    mean = a @ state.mean
    cov = a @ state.cov @ a.T + params.process_noise
    cov = 0.5 * (cov + cov.T)
    return TrackState(mean=mean, cov=cov)


def kf_update(
    state: TrackState, meas: Ellipse, r_p: float, params: TrackerParams
) -> TrackState:
    """Linear update with measurement [cx, cy, a, b, theta].

    The measurement covariance is diag(r_p, r_p, r_shape, r_shape,
    r_shape); the orientation residual is wrapped to [-pi/2, pi/2).
    """
    if r_p <= 0.0:
        raise ValueError("position measurement variance must be positive")
    h = measurement_matrix()
    z = np.array([meas.cx, meas.cy, meas.a, meas.b, meas.theta])
    innov = z - h @ state.mean
    innov[4] = wrap_orientation(innov[4])

    r = np.diag([r_p, r_p, params.r_shape, params.r_shape, params.r_shape])
    s = h @ state.cov @ h.T + r
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise ValueError("filter divergence: innovation covariance not PD") from exc

    gain = np.linalg.solve(s, h @ state.cov).T
    mean = state.mean + gain @ innov
    mean[8] = wrap_orientation(mean[8])
    ikh = np.eye(STATE_DIM) - gain @ h
    cov = ikh @ state.cov @ ikh.T + gain @ r @ gain.T
    cov = 0.5 * (cov + cov.T)
    return TrackState(mean=mean, cov=cov)


def confidence(
    history: Sequence[Ellipse], params: TrackerParams
) -> Tuple[float, float]:
    """Shape-change indicator and the derived position-confidence estimate.

    xi_eta is the summed squared deviation of the shape vectors [a, b,
    theta] from their window mean, divided by (m - 1); the position
    confidence estimate is kappa * xi_eta ** gamma_pow.

    Orientations have period pi, so the theta components are aligned to
    the window's first sample before averaging; otherwise an ellipse
    whose major axis hovers near +-pi/2 produces spurious full-range
    jumps in the indicator.
    """
    m = len(history)
    if m < 2:
        raise ValueError("insufficient history: need at least 2 ellipses")
    shapes = np.array([e.shape for e in history])
    theta0 = shapes[0, 2]
    shapes[:, 2] = theta0 + np.array(
        [wrap_orientation(t - theta0) for t in shapes[:, 2]]
    )
    xi_eta = float(np.sum((shapes - shapes.mean(axis=0)) ** 2) / (m - 1))
    xi_p_hat = params.kappa * xi_eta**params.gamma_pow
    return xi_eta, xi_p_hat


def true_position_confidence(meas_centers, true_centers) -> float:
    """Ground-truth position indicator over a backward window.

    Summed squared center error over the window divided by (m - 1);
    usable only in simulation where true obstacle positions exist.
    """
    meas = np.asarray(meas_centers, dtype=float).reshape(-1, 2)
    true = np.asarray(true_centers, dtype=float).reshape(-1, 2)
    if meas.shape != true.shape or len(meas) < 2:
        raise ValueError("need matching center histories of length >= 2")
    m = len(meas)
    return float(np.sum((meas - true) ** 2) / (m - 1))


def adapt_position_variance(xi_p_hat: float, params: TrackerParams) -> float:
    """Geometric interpolation of the position variance between its bounds.

    The interpolation exponent is the log-ratio of the confidence
    estimate to its critical bounds, clamped to [0, 1].
    """
    if xi_p_hat <= 0.0:
        k = 0.0
    else:
        k = math.log(xi_p_hat / params.xi_min_crit) / math.log(
            params.xi_max_crit / params.xi_min_crit
        )
        k = min(max(k, 0.0), 1.0)
    return params.r_p_max**k * params.r_p_min ** (1.0 - k)


def _inflation_residual(sigma: float, a: float, b: float, r: float) -> float:
    s = sigma + r
    num = 2.0 * s * s * ((a + b) * s + 2.0 * a * b)
    den = (a + b) * (a + b + 2.0 * sigma + 2.0 * r)
    return num / den - r * r


def inflate(a: float, b: float, r: float, mode: str = "root") -> Tuple[float, bool]:
    """Axis extension bounding the Minkowski sum of the ellipse and a disk r.

    ``root`` mode returns the smallest non-negative root of the implicit
    inflation equation (bisection, |residual| < 1e-9). For circles
    (a == b) the equation is satisfied at 0: no inflation. The
    ``conservative`` mode returns sigma = r, the exact Minkowski disk
    bound. Returns (sigma, fallback) where fallback flags a failed
    bracket (conservative value returned).
    """
    if min(a, b, r) < 0.0:
        raise ValueError("axes and radius must be non-negative")
    if mode == "conservative":
        return r, False
    if mode != "root":
        raise ValueError("mode must be 'root' or 'conservative'")
    if r == 0.0:
        return 0.0, False
    if a + b <= 0.0:
        return r, True

    lo, hi = 0.0, a + b + 2.0 * r
    f_lo = _inflation_residual(lo, a, b, r)
    scale = max(1.0, r * r)
    if f_lo >= -1e-14 * scale:
        return 0.0, False
    if _inflation_residual(hi, a, b, r) <= 0.0:
        return r, True
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _inflation_residual(mid, a, b, r) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi), False


def _uncertainty_radius(cov: np.ndarray, sigma_mult: float) -> float:
    """r_p + r_eta: sigma-scaled position eigen-bound plus axis-length bound."""
    pos_cov = cov[IDX_POS, IDX_POS]
    eig_max = max(float(np.linalg.eigvalsh(pos_cov)[-1]), 0.0)
    r_p = sigma_mult * math.sqrt(eig_max)
    shape_var = max(float(cov[6, 6]), float(cov[7, 7]), 0.0)
    r_eta = sigma_mult * math.sqrt(shape_var)
    return r_p + r_eta


def predict_trajectory(
    state: TrackState, params: TrackerParams, horizon: int, label: int = 0
) -> PredictedObstacle:
    """Propagate a track over the horizon and inflate by uncertainty.

    Entry k = 0 is the current estimate; entries 1..N are filter
    predictions. The uncertainty radius is kept non-decreasing in k (the
    predicted covariance grows with the process noise; a running max
    guards against transient dips from cross-covariance terms).
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    ellipses: List[Ellipse] = []
    radii: List[float] = []
    estimated: List[Ellipse] = []
    cur = state
    r_run = 0.0
    for _ in range(horizon + 1):
        est = cur.ellipse()
        r_raw = min(_uncertainty_radius(cur.cov, params.sigma_mult), params.radius_cap)
        r_run = max(r_run, r_raw)
        sigma, _ = inflate(est.a, est.b, r_run, mode=params.inflate_mode)
        estimated.append(est)
        radii.append(r_run)
        ellipses.append(est.inflated(sigma))
        cur = kf_predict(cur, params)
    return PredictedObstacle(
        label=label,
        ellipses=tuple(ellipses),
        radii=tuple(radii),
        estimated=tuple(estimated),
    )


class _Track:
    __slots__ = ("state", "history", "label", "age", "misses")

    def __init__(self, state: TrackState, label: int, window: int) -> None:
        self.state = state
        self.label = label
        self.history: Deque[Ellipse] = deque(maxlen=window)
        self.age = 0
        self.misses = 0


class ObstacleTracker:
    """Owns one Kalman filter per active obstacle label.

    Per-frame flow: every track is time-propagated, matched detections
    are fused with a position variance adapted to the track's recent
    shape-change confidence, unmatched tracks coast.
    """

    def __init__(self, params: Optional[TrackerParams] = None) -> None:
        self.params = params or TrackerParams()
        self._tracks: Dict[int, _Track] = {}

    @property
    def labels(self) -> List[int]:
        return sorted(self._tracks)

    @property
    def confirmed_labels(self) -> List[int]:
        return sorted(
            label
            for label, t in self._tracks.items()
            if t.age >= self.params.min_updates and t.misses == 0
        )

    def measurement_history(self, label: int) -> List[Ellipse]:
        return list(self._tracks[label].history)

    def center_history(self, label: int) -> np.ndarray:
        return np.array([e.center for e in self._tracks[label].history])

    def last_r_p(self, label: int) -> float:
        track = self._tracks[label]
        if len(track.history) >= 2:
            _, xi_p_hat = confidence(track.history, self.params)
            return adapt_position_variance(xi_p_hat, self.params)
        return self.params.r_p_max

    def update(self, detections: Sequence[LabeledEllipse]) -> None:
        seen = set()
        for det in detections:
            seen.add(det.label)
            track = self._tracks.get(det.label)
            if track is None:
                track = _Track(
                    TrackState.from_measurement(det.ellipse, self.params),
                    det.label,
                    self.params.window,
                )
                self._tracks[det.label] = track
                track.history.append(det.ellipse)
                track.age = 1
                continue
            track.state = kf_predict(track.state, self.params)
            r_p = self.last_r_p(det.label)
            track.state = kf_update(track.state, det.ellipse, r_p, self.params)
            track.history.append(det.ellipse)
            track.age += 1
            track.misses = 0
        for label, track in self._tracks.items():
            if label not in seen:
                track.state = kf_predict(track.state, self.params)
                track.misses += 1

    def prune(self, active_labels: Sequence[int]) -> None:
        keep = set(active_labels)
        self._tracks = {l: t for l, t in self._tracks.items() if l in keep}

    def predict_all(self, horizon: int, confirmed_only: bool = True) -> List[PredictedObstacle]:
        """Predictions for planner consumption.

        By default only confirmed tracks (enough updates) that matched a
        detection this frame are emitted; immature or coasting tracks
        produce velocity artifacts from partially windowed obstacles.
        """
        out = []
        for label, t in sorted(self._tracks.items()):
            if confirmed_only and (t.age < self.params.min_updates or t.misses > 0):
                continue
            out.append(predict_trajectory(t.state, self.params, horizon, label=label))
        return out
