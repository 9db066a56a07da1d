"""Obstacle extraction and frame-to-frame association.

Masked grid cells are clustered with DBSCAN, each cluster is enclosed in
its minimum bounding ellipse, and ellipses are matched across frames by
a minimum-total-distance assignment on center distances so obstacle
labels stay consistent over time.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import ConvexHull, QhullError, cKDTree

from dcbfnav.geometry import Ellipse


@dataclass(frozen=True)
class Cluster:
    """Non-empty set of cell centers (world coordinates) forming one obstacle."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if len(pts) == 0:
            raise ValueError("cluster must be non-empty")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


@dataclass(frozen=True)
class LabeledEllipse:
    """Detection with a persistent track label."""

    ellipse: Ellipse
    label: int
    frame_time: float = 0.0

    def __post_init__(self) -> None:
        if self.label < 0:
            raise ValueError("label must be non-negative")


@dataclass
class AssociationParams:
    d_max: float = 1.0
    persistence: int = 3

    def __post_init__(self) -> None:
        if self.d_max <= 0.0:
            raise ValueError("d_max must be positive")
        if self.persistence < 1:
            raise ValueError("persistence must be at least 1")


def dbscan(points, eps: float, min_pts: int) -> Tuple[List[Cluster], np.ndarray]:
    """Standard DBSCAN on a 2D point set.

    Core points have >= min_pts neighbors (self included) within eps;
    clusters are maximal density-connected sets; non-core points not
    reachable from any core point are returned as noise.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if min_pts < 1:
        raise ValueError("min_pts must be at least 1")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        return [], np.empty((0, 2))

    tree = cKDTree(pts)
    neighborhoods = tree.query_ball_point(pts, r=eps)
    core = np.fromiter((len(nb) >= min_pts for nb in neighborhoods), bool, count=n)

    labels = np.full(n, -1, dtype=int)
    n_clusters = 0
    for seed in range(n):
        if labels[seed] != -1 or not core[seed]:
            continue
        labels[seed] = n_clusters
        queue = deque([seed])
        while queue:
            j = queue.popleft()
            for k in neighborhoods[j]:
                if labels[k] == -1:
                    labels[k] = n_clusters
                    if core[k]:
                        queue.append(k)
        n_clusters += 1

    clusters = [Cluster(pts[labels == c]) for c in range(n_clusters)]
    noise = pts[labels == -1]
    return clusters, noise


def _khachiyan_weights(lifted: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    """Dual weights of the minimum-volume enclosing ellipsoid.

    Frank-Wolfe iteration on the lifted points with away (drop) steps for
    linear convergence; stops when the worst lifted Mahalanobis radius is
    within ``tol`` of its optimal value d+1.
    """
    n, dd = lifted.shape
    u = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        v = lifted.T @ (lifted * u[:, None])
        v_inv = np.linalg.inv(v)
        w = ((lifted @ v_inv) * lifted).sum(axis=1)
        j = int(np.argmax(w))
        if w[j] <= dd * (1.0 + tol):
            break
        support = np.nonzero(u > 1e-12)[0]
        k = support[int(np.argmin(w[support]))]
        if (w[j] - dd) >= (dd - w[k]) or w[k] <= 1.0 + 1e-12:
            lam = (w[j] - dd) / (dd * (w[j] - 1.0))
            u *= 1.0 - lam
            u[j] += lam
        else:
            lam = (dd - w[k]) / (dd * (w[k] - 1.0))
            if u[k] < 1.0:
                lam = min(lam, u[k] / (1.0 - u[k]))
            u *= 1.0 + lam
            u[k] = max(u[k] - lam, 0.0)
    return u


def _segment_ellipse(pts: np.ndarray, b_min: float) -> Ellipse:
    """Regularized ellipse for collinear (or single-point) input."""
    mean = pts.mean(axis=0)
    centered = pts - mean
    if len(pts) == 1 or not centered.any():
        return Ellipse(mean[0], mean[1], b_min, b_min, 0.0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    direction = vt[0]
    proj = centered @ direction
    lo, hi = float(proj.min()), float(proj.max())
    center = mean + direction * 0.5 * (lo + hi)
    a = max(0.5 * (hi - lo), b_min)
    theta = math.atan2(direction[1], direction[0])
    return Ellipse(center[0], center[1], a, b_min, theta)


def min_bounding_ellipse(
    points,
    b_min: float = 0.1,
    tol: float = 1e-7,
    max_iter: int = 1000,
) -> Ellipse:
    """Minimum-area enclosing ellipse of a 2D point set.

    Computed via the Khachiyan iteration for the minimum-volume enclosing
    ellipsoid, then rescaled so every input point is contained exactly
    (up to float precision). Degenerate inputs (single point, collinear
    points) are regularized with the ``b_min`` axis floor.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise ValueError("minimum bounding ellipse needs at least one point")
    if b_min <= 0.0:
        raise ValueError("b_min must be positive")

    centered = pts - pts.mean(axis=0)
    svals = np.linalg.svd(centered, compute_uv=False) if len(pts) > 1 else np.zeros(2)
    if len(pts) < 3 or svals[-1] <= 1e-9 * max(svals[0], 1.0):
        return _segment_ellipse(pts, b_min)

    # the enclosing ellipse depends only on the convex hull
    work = pts
    if len(pts) > 8:
        try:
            work = pts[ConvexHull(pts).vertices]
        except QhullError:
            return _segment_ellipse(pts, b_min)

    lifted = np.column_stack([work, np.ones(len(work))])
    try:
        u = _khachiyan_weights(lifted, tol, max_iter)
        c = work.T @ u
        cov = work.T @ (work * u[:, None]) - np.outer(c, c)
        shape_mat = np.linalg.inv(cov) / 2.0
    except np.linalg.LinAlgError:
        return _segment_ellipse(pts, b_min)

    # expand so max Mahalanobis radius is exactly 1 (containment guarantee)
    rel = pts - c
    radii = np.einsum("ij,jk,ik->i", rel, shape_mat, rel)
    shape_mat = shape_mat / max(float(radii.max()), 1e-30)

    evals, evecs = np.linalg.eigh(shape_mat)
    if evals[0] <= 0.0:
        return _segment_ellipse(pts, b_min)
    a = 1.0 / math.sqrt(evals[0])
    b = 1.0 / math.sqrt(evals[1])
    theta = math.atan2(evecs[1, 0], evecs[0, 0])
    b = max(b, b_min)
    a = max(a, b)
    return Ellipse(c[0], c[1], a, b, theta)


def min_cost_assignment(cost: np.ndarray) -> List[Tuple[int, int]]:
    """Minimum-total-cost assignment (Kuhn-Munkres) on a rectangular matrix."""
    rows, cols = linear_sum_assignment(np.asarray(cost, dtype=float))
    return list(zip(rows.tolist(), cols.tolist()))


def associate(
    prev: Sequence[LabeledEllipse],
    cur: Sequence[Ellipse],
    params: AssociationParams,
    frame_time: float = 0.0,
    next_label: Optional[int] = None,
) -> List[LabeledEllipse]:
    """Carry labels from the previous frame onto the current detections.

    The affinity matrix holds center distances between previous and
    current ellipses; a minimum-total-distance assignment is computed and
    pairs farther apart than d_max are rejected. Unmatched current
    ellipses receive fresh labels.
    """
    if next_label is None:
        next_label = max((le.label for le in prev), default=-1) + 1

    labels: List[Optional[int]] = [None] * len(cur)
    if prev and cur:
        prev_centers = np.array([le.ellipse.center for le in prev])
        cur_centers = np.array([e.center for e in cur])
        cost = np.linalg.norm(
            prev_centers[:, None, :] - cur_centers[None, :, :], axis=2
        )
        for r, c in min_cost_assignment(cost):
            if cost[r, c] <= params.d_max:
                labels[c] = prev[r].label

    out = []
    for ellipse, label in zip(cur, labels):
        if label is None:
            label = next_label
            next_label += 1
        out.append(LabeledEllipse(ellipse=ellipse, label=label, frame_time=frame_time))
    return out


class FrameAssociator:
    """Owns the frame-to-frame label state.

    Unmatched previous tracks stay as match candidates (at their last
    seen pose) and are retired after ``persistence`` consecutive misses.
    """

    def __init__(self, params: Optional[AssociationParams] = None) -> None:
        self.params = params or AssociationParams()
        self._candidates: List[LabeledEllipse] = []
        self._misses: Dict[int, int] = {}
        self._next_label = 0

    @property
    def active_labels(self) -> List[int]:
        return [le.label for le in self._candidates]

    def update(self, detections: Sequence[Ellipse], frame_time: float = 0.0) -> List[LabeledEllipse]:
        labeled = associate(
            self._candidates,
            detections,
            self.params,
            frame_time=frame_time,
            next_label=self._next_label,
        )
        if labeled:
            self._next_label = max(self._next_label, max(le.label for le in labeled) + 1)

        matched = {le.label for le in labeled}
        survivors: List[LabeledEllipse] = list(labeled)
        for le in self._candidates:
            if le.label in matched:
                continue
            misses = self._misses.get(le.label, 0) + 1
            if misses < self.params.persistence:
                self._misses[le.label] = misses
                survivors.append(le)
        self._misses = {le.label: self._misses.get(le.label, 0) for le in survivors}
        for le in labeled:
            self._misses[le.label] = 0
        self._candidates = survivors
        return labeled
