"""Receding-horizon control with discrete-time dynamic barrier constraints.

The optimization tracks a reference trajectory under the differential-
drive model subject to input bounds, a terminal ball, and one barrier
constraint per obstacle per step. The barrier value is the robot-to-
ellipse-center distance minus the center-ray periphery distance minus
the safety margin; the dynamic variant evaluates the next-step barrier
against the obstacle's predicted pose, which is what lets the plan react
to obstacle motion inside the horizon.

Solver: sequential local optimization. Dynamics and barrier constraints
are linearized about the current rollout, the resulting convex quadratic
subproblem (slack-relaxed barriers, trust-region bounds) is solved with
cvxopt, and steps are accepted against an exact-penalty merit function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

from dcbfnav.geometry import ControlInput, Ellipse, RobotState, wrap_angle
from dcbfnav.tracking import PredictedObstacle

PLANNER_KINDS = ("mpc-euclid", "mpc-cbf", "mpc-kf", "mpc-cbf-curvefit", "mpc-dcbf")

_QP_OPTIONS = {
    "show_progress": False,
    "maxiters": 100,
    "abstol": 1e-8,
    "reltol": 1e-7,
    "feastol": 1e-9,
}


@dataclass
class PlannerParams:
    """Horizon, weights, bounds, and solver settings."""

    horizon: int = 25
    dt: float = 0.1
    gamma_cbf: float = 0.15
    d_safe: float = 1.3
    weight_q: Tuple[float, float, float] = (0.6, 0.6, 0.06)
    weight_p: Tuple[float, float, float] = (10.0, 10.0, 1.0)
    weight_r: Tuple[float, float] = (0.1, 0.02)
    weight_s: Tuple[float, float] = (5.0, 0.8)
    v_min: float = 0.0
    v_max: float = 1.35
    omega_max: float = 1.5
    accel_max: float = 1.0
    omega_accel_max: float = 3.0
    terminal_radius: float = 2.0
    slack_penalty: float = 1e4
    sqp_tol: float = 1e-6
    sqp_max_iter: int = 30
    trust_region: float = 0.5
    # reserve demanded on top of each barrier constraint; absorbs
    # tick-to-tick estimate jumps so active constraints keep headroom
    cbf_margin: float = 0.10

    def __post_init__(self) -> None:
        if not (0.0 < self.gamma_cbf <= 1.0):
            raise ValueError("gamma_cbf must lie in (0, 1]")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.v_min >= self.v_max or self.omega_max <= 0.0:
            raise ValueError("invalid input bounds")

    @property
    def u_lower(self) -> np.ndarray:
        return np.array([self.v_min, -self.omega_max])

    @property
    def u_upper(self) -> np.ndarray:
        return np.array([self.v_max, self.omega_max])

    @property
    def u_rate(self) -> np.ndarray:
        """Max input change per step (acceleration limits)."""
        return np.array([self.accel_max * self.dt, self.omega_accel_max * self.dt])


@dataclass(frozen=True)
class BarrierEval:
    """Barrier value h and the center-ray distance l it was built from."""

    h: float
    l: float


@dataclass
class MpcSolution:
    controls: np.ndarray  # (N, 2)
    states: Tuple[RobotState, ...]  # N + 1
    cbf_residuals: np.ndarray  # (n_obstacles, N)
    status: str  # optimal | slack-relaxed | infeasible
    cost: float
    iterations: int

    @property
    def first_control(self) -> ControlInput:
        return ControlInput(float(self.controls[0, 0]), float(self.controls[0, 1]))

    @property
    def min_residual(self) -> float:
        if self.cbf_residuals.size == 0:
            return math.inf
        return float(self.cbf_residuals.min())


def dynamics_step(x: RobotState, u: ControlInput, dt: float) -> RobotState:
    """Euler step of the differential-drive (unicycle) model."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return RobotState(
        x.x + math.cos(x.heading) * u.v * dt,
        x.y + math.sin(x.heading) * u.v * dt,
        wrap_angle(x.heading + u.omega * dt),
    )


def barrier(x: RobotState, ob: Ellipse, d_safe: float) -> BarrierEval:
    """h = ||p - c|| - l(center->p ray) - d_safe."""
    from dcbfnav.geometry import ray_ellipse_distance

    dist = math.hypot(x.x - ob.cx, x.y - ob.cy)
    l = ray_ellipse_distance(ob, (x.x, x.y))
    return BarrierEval(h=dist - l - d_safe, l=l)


def _barrier_h_grad(px: float, py: float, ob: Ellipse) -> Tuple[float, np.ndarray]:
    """Barrier value (without d_safe) and its gradient w.r.t. robot position.

    Intermediate solver iterates may land exactly on an ellipse center;
    there the value is pinned to the deepest penetration (-a) with the
    major axis as a deterministic descent direction.
    """
    rx, ry = px - ob.cx, py - ob.cy
    n2 = rx * rx + ry * ry
    n = math.sqrt(n2)
    if n < 1e-9:
        return -ob.a, np.array([math.cos(ob.theta), math.sin(ob.theta)])
    ct, st = math.cos(ob.theta), math.sin(ob.theta)
    cos_d = (rx * ct + ry * st) / n
    sin_d = (-rx * st + ry * ct) / n
    a2, b2 = ob.a * ob.a, ob.b * ob.b
    denom = b2 * cos_d * cos_d + a2 * sin_d * sin_d
    l = ob.a * ob.b / math.sqrt(denom)
    dl_dd = -ob.a * ob.b * (a2 - b2) * sin_d * cos_d / denom**1.5
    # d(delta)/dp = (-ry, rx) / n^2
    grad = np.array(
        [rx / n + dl_dd * ry / n2, ry / n - dl_dd * rx / n2]
    )
    return n - l, grad


def cbf_constraint(
    x_k: RobotState,
    x_k1: RobotState,
    ob_k: Ellipse,
    ob_k1: Ellipse,
    params: PlannerParams,
) -> float:
    """Decay-constraint residual h(X_{k+1}) - (1 - gamma) h(X_k).

    Satisfied iff the residual is non-negative. X_{k+1} is evaluated
    against the predicted obstacle at step k+1.
    """
    h_k = barrier(x_k, ob_k, params.d_safe).h
    h_k1 = barrier(x_k1, ob_k1, params.d_safe).h
    return h_k1 - (1.0 - params.gamma_cbf) * h_k


def _obstacle_at(seq: Sequence[Ellipse], k: int) -> Ellipse:
    """Prediction clamped at the last available ellipse."""
    return seq[min(k, len(seq) - 1)]


def _rollout(x0: RobotState, controls: np.ndarray, dt: float) -> List[RobotState]:
    states = [x0]
    for v, w in controls:
        states.append(dynamics_step(states[-1], ControlInput(float(v), float(w)), dt))
    return states


def _rate_project(
    controls: np.ndarray, u_prev: Optional[np.ndarray], params: PlannerParams
) -> np.ndarray:
    """Forward projection onto the box and per-step rate bounds."""
    out = np.clip(controls, params.u_lower, params.u_upper)
    rate = params.u_rate
    anchor = u_prev
    for k in range(len(out)):
        if anchor is not None:
            out[k] = np.clip(out[k], anchor - rate, anchor + rate)
            out[k] = np.clip(out[k], params.u_lower, params.u_upper)
        anchor = out[k]
    return out


def _heading_error(states: Sequence[RobotState], ref: np.ndarray) -> np.ndarray:
    err = np.array([s.to_array() for s in states]) - ref
    err[:, 2] = [wrap_angle(v) for v in err[:, 2]]
    return err


class _Subproblem:
    """Rollout-local data: sensitivities, cost model, constraint rows."""

    def __init__(
        self,
        x0: RobotState,
        controls: np.ndarray,
        ref: np.ndarray,
        obstacles: Sequence[Sequence[Ellipse]],
        params: PlannerParams,
        mode: str,
        radius: float,
        u_prev: Optional[np.ndarray] = None,
    ) -> None:
        self.params = params
        n = params.horizon
        nu = 2 * n
        self.states = _rollout(x0, controls, params.dt)
        self.controls = controls

        # forward sensitivities S_k = dx_k / du  (N+1, 3, 2N)
        sens = np.zeros((n + 1, 3, nu))
        dt = params.dt
        for k in range(n):
            v = controls[k, 0]
            th = self.states[k].heading
            a_k = np.eye(3)
            a_k[0, 2] = -v * math.sin(th) * dt
            a_k[1, 2] = v * math.cos(th) * dt
            sens[k + 1] = a_k @ sens[k]
            sens[k + 1][0, 2 * k] += math.cos(th) * dt
            sens[k + 1][1, 2 * k] += math.sin(th) * dt
            sens[k + 1][2, 2 * k + 1] += dt
        self.sens = sens

        err = _heading_error(self.states, ref)
        qvec = np.tile(np.asarray(params.weight_q, float), (n + 1, 1))
        qvec[n] = np.asarray(params.weight_p, float)
        sq = sens * qvec[:, :, None]
        self.hess = 2.0 * np.einsum("kin,kim->nm", sq, sens)
        self.grad = 2.0 * np.einsum("kin,ki->n", sens, qvec * err)

        r = np.asarray(params.weight_r, float)
        rb = np.tile(r, n)
        self.hess[np.arange(nu), np.arange(nu)] += 2.0 * rb
        self.grad += 2.0 * rb * controls.ravel()

        if n >= 2:
            sw = np.asarray(params.weight_s, float)
            d = np.zeros((2 * (n - 1), nu))
            rows = np.arange(2 * (n - 1))
            d[rows, rows] = -1.0
            d[rows, rows + 2] = 1.0
            du_seq = (controls[1:] - controls[:-1]).ravel()
            swb = np.tile(sw, n - 1)
            self.hess += 2.0 * d.T @ (swb[:, None] * d)
            self.grad += 2.0 * d.T @ (swb * du_seq)

        self.cost = self._true_cost(self.states, controls, ref)
        self.err = err
        self.ref = ref

        # barrier constraint rows: value c and gradient a s.t. c + a @ du >= 0;
        # rows that cannot activate within the trust region are screened out
        self.con_vals: List[float] = []
        self.con_grads: List[np.ndarray] = []

        margin = params.cbf_margin

        def _add_row(c: float, a: np.ndarray) -> None:
            c -= margin
            if c - float(np.abs(a).sum()) * radius <= 1e-6:
                self.con_vals.append(c)
                self.con_grads.append(a)

        gamma = params.gamma_cbf
        for seq in obstacles:
            if mode == "dcbf":
                h_cache = []
                g_cache = []
                for k in range(n + 1):
                    hv, gv = _barrier_h_grad(
                        self.states[k].x, self.states[k].y, _obstacle_at(seq, k)
                    )
                    h_cache.append(hv - params.d_safe)
                    g_cache.append(gv)
                for k in range(n):
                    c = h_cache[k + 1] - (1.0 - gamma) * h_cache[k]
                    a = g_cache[k + 1] @ sens[k + 1][0:2] - (1.0 - gamma) * (
                        g_cache[k] @ sens[k][0:2]
                    )
                    _add_row(c, a)
            elif mode == "keepout":
                for k in range(1, n + 1):
                    hv, gv = _barrier_h_grad(
                        self.states[k].x, self.states[k].y, _obstacle_at(seq, k)
                    )
                    _add_row(hv - params.d_safe, gv @ sens[k][0:2])
            else:
                raise ValueError(f"unknown constraint mode {mode!r}")

        # terminal ball (linearized only when meaningfully active)
        pn = self.states[n].position
        pd = ref[n, 0:2]
        gap = float(np.linalg.norm(pn - pd))
        self.term_val: Optional[float] = None
        self.term_grad: Optional[np.ndarray] = None
        if gap > 0.5 * params.terminal_radius:
            self.term_val = gap
            self.term_grad = ((pn - pd) / gap) @ sens[n][0:2]

        # hard input-rate rows: |u_{k+1} - u_k| (and |u_0 - u_prev|) bounded
        nu = 2 * n
        rate = params.u_rate
        hard_rows: List[np.ndarray] = []
        hard_rhs: List[float] = []
        if u_prev is not None:
            for c in range(2):
                row = np.zeros(nu)
                row[c] = 1.0
                gap0 = controls[0, c] - u_prev[c]
                hard_rows.append(row)
                hard_rhs.append(rate[c] - gap0)
                hard_rows.append(-row)
                hard_rhs.append(rate[c] + gap0)
        for k in range(n - 1):
            for c in range(2):
                row = np.zeros(nu)
                row[2 * (k + 1) + c] = 1.0
                row[2 * k + c] = -1.0
                gap_k = controls[k + 1, c] - controls[k, c]
                hard_rows.append(row)
                hard_rhs.append(rate[c] - gap_k)
                hard_rows.append(-row)
                hard_rhs.append(rate[c] + gap_k)
        self.hard_rows = hard_rows
        self.hard_rhs = hard_rhs

    def _true_cost(
        self, states: Sequence[RobotState], controls: np.ndarray, ref: np.ndarray
    ) -> float:
        p = self.params
        err = _heading_error(states, ref)
        q = np.asarray(p.weight_q, float)
        pw = np.asarray(p.weight_p, float)
        cost = float(np.sum(err[:-1] ** 2 @ q) + err[-1] ** 2 @ pw)
        cost += float(np.sum(controls**2 @ np.asarray(p.weight_r, float)))
        if len(controls) >= 2:
            d = controls[1:] - controls[:-1]
            cost += float(np.sum(d**2 @ np.asarray(p.weight_s, float)))
        return cost


def _merit_terms(
    x0: RobotState,
    controls: np.ndarray,
    ref: np.ndarray,
    obstacles: Sequence[Sequence[Ellipse]],
    params: PlannerParams,
    mode: str,
) -> Tuple[float, float, np.ndarray, List[RobotState]]:
    """(true cost, total violation, residual matrix, states) at ``controls``."""
    states = _rollout(x0, controls, params.dt)
    n = params.horizon
    err = _heading_error(states, ref)
    q = np.asarray(params.weight_q, float)
    pw = np.asarray(params.weight_p, float)
    cost = float(np.sum(err[:-1] ** 2 @ q) + err[-1] ** 2 @ pw)
    cost += float(np.sum(controls**2 @ np.asarray(params.weight_r, float)))
    if len(controls) >= 2:
        d = controls[1:] - controls[:-1]
        cost += float(np.sum(d**2 @ np.asarray(params.weight_s, float)))

    residuals = np.full((len(obstacles), n), np.inf)
    gamma = params.gamma_cbf
    for i, seq in enumerate(obstacles):
        if mode == "dcbf":
            h_prev = (
                _barrier_h_grad(states[0].x, states[0].y, _obstacle_at(seq, 0))[0]
                - params.d_safe
            )
            for k in range(n):
                ob = _obstacle_at(seq, k + 1)
                h_next = (
                    _barrier_h_grad(states[k + 1].x, states[k + 1].y, ob)[0]
                    - params.d_safe
                )
                residuals[i, k] = h_next - (1.0 - gamma) * h_prev
                h_prev = h_next
        else:
            for k in range(1, n + 1):
                ob = _obstacle_at(seq, k)
                residuals[i, k - 1] = (
                    _barrier_h_grad(states[k].x, states[k].y, ob)[0] - params.d_safe
                )

    if residuals.size:
        violation = float(np.sum(np.maximum(0.0, params.cbf_margin - residuals)))
    else:
        violation = 0.0
    gap = float(np.linalg.norm(states[n].position - ref[n, 0:2]))
    violation += max(0.0, gap - params.terminal_radius)
    return cost, violation, residuals, states


def _solve_qp(
    sub: _Subproblem, lb: np.ndarray, ub: np.ndarray, params: PlannerParams
) -> Optional[np.ndarray]:
    nu = lb.size
    n_con = len(sub.con_vals)
    n_term = 1 if sub.term_val is not None else 0
    n_s = n_con + n_term
    dim = nu + n_s

    p_mat = np.zeros((dim, dim))
    p_mat[:nu, :nu] = sub.hess + 1e-8 * np.eye(nu)
    if n_s:
        p_mat[nu:, nu:] = 1e-9 * np.eye(n_s)
    q_vec = np.concatenate([sub.grad, np.full(n_s, params.slack_penalty)])

    rows: List[np.ndarray] = []
    rhs: List[float] = []
    for j in range(n_con):
        row = np.zeros(dim)
        row[:nu] = -sub.con_grads[j]
        row[nu + j] = -1.0
        rows.append(row)
        rhs.append(sub.con_vals[j])
    if n_term:
        row = np.zeros(dim)
        row[:nu] = sub.term_grad
        row[nu + n_con] = -1.0
        rows.append(row)
        rhs.append(params.terminal_radius - sub.term_val)
    for hrow, hval in zip(sub.hard_rows, sub.hard_rhs):
        row = np.zeros(dim)
        row[:nu] = hrow
        rows.append(row)
        rhs.append(hval)
    for j in range(n_s):
        row = np.zeros(dim)
        row[nu + j] = -1.0
        rows.append(row)
        rhs.append(0.0)
    eye = np.eye(nu)
    for j in range(nu):
        row = np.zeros(dim)
        row[:nu] = eye[j]
        rows.append(row)
        rhs.append(ub[j])
    for j in range(nu):
        row = np.zeros(dim)
        row[:nu] = -eye[j]
        rows.append(row)
        rhs.append(-lb[j])

    g_mat = np.vstack(rows)
    h_vec = np.array(rhs)
    try:
        sol = cvx_solvers.qp(
            cvx_matrix(p_mat),
            cvx_matrix(q_vec),
            cvx_matrix(g_mat),
            cvx_matrix(h_vec),
            options=_QP_OPTIONS,
        )
    except (ValueError, ArithmeticError, ZeroDivisionError):
        return None
    if sol["status"] != "optimal":
        return None
    return np.array(sol["x"]).ravel()[:nu]


def _braking_controls(
    u_prev: Optional[np.ndarray], params: PlannerParams
) -> np.ndarray:
    """Maximal deceleration toward standstill, rate-feasible from u_prev."""
    n = params.horizon
    return _rate_project(np.zeros((n, 2)), u_prev, params)


def _fallback_solution(
    x0: RobotState,
    ref: np.ndarray,
    obstacles: Sequence[Sequence[Ellipse]],
    params: PlannerParams,
    iterations: int,
    mode: str,
    u_prev: Optional[np.ndarray],
) -> MpcSolution:
    """Maximal-braking degradation when the optimizer fails outright."""
    controls = _braking_controls(u_prev, params)
    cost, _, residuals, states = _merit_terms(x0, controls, ref, obstacles, params, mode)
    return MpcSolution(
        controls=controls,
        states=tuple(states),
        cbf_residuals=residuals,
        status="infeasible",
        cost=cost,
        iterations=iterations,
    )


def solve(
    x_t: RobotState,
    reference: Sequence[RobotState],
    obstacles: Sequence[Sequence[Ellipse]],
    params: PlannerParams,
    warm_start: Optional[np.ndarray] = None,
    constraint_mode: str = "dcbf",
    u_prev: Optional[np.ndarray] = None,
) -> MpcSolution:
    """Solve one receding-horizon problem.

    ``reference`` must hold N+1 states; ``obstacles`` holds one ellipse
    sequence per obstacle (index = horizon step, clamped at the end, so a
    length-1 sequence means a frozen obstacle). ``warm_start`` is an
    (N, 2) control sequence owned by the caller; ``u_prev`` is the input
    applied on the previous cycle and anchors the acceleration bounds.
    """
    n = params.horizon
    if len(reference) != n + 1:
        raise ValueError(f"reference must hold {n + 1} states")
    ref = np.array([s.to_array() for s in reference])
    if u_prev is not None:
        u_prev = np.asarray(u_prev, dtype=float).reshape(2)

    if warm_start is not None:
        controls = np.asarray(warm_start, float).reshape(n, 2).copy()
    else:
        # feedforward from reference spacing
        controls = np.zeros((n, 2))
        for k in range(n):
            step = np.linalg.norm(ref[k + 1, 0:2] - ref[k, 0:2])
            controls[k, 0] = step / params.dt
            controls[k, 1] = wrap_angle(ref[k + 1, 2] - ref[k, 2]) / params.dt
    controls = _rate_project(controls, u_prev, params)

    best, iterations, qp_succeeded = _sqp(
        x_t, controls, ref, obstacles, params, constraint_mode, u_prev
    )
    if not qp_succeeded:
        return _fallback_solution(
            x_t, ref, obstacles, params, iterations, constraint_mode, u_prev
        )

    # constraint activation can strand the warm start in an infeasible
    # local valley; a braking initialization explores the other homotopy
    if best[1] > 1e-3 and obstacles:
        brake = _braking_controls(u_prev, params)
        alt, alt_iters, alt_ok = _sqp(
            x_t, brake, ref, obstacles, params, constraint_mode, u_prev
        )
        iterations += alt_iters
        if alt_ok and _iterate_key(alt) < _iterate_key(best):
            best = alt

    controls = best[2]
    cost, violation, residuals, states = _merit_terms(
        x_t, controls, ref, obstacles, params, constraint_mode
    )
    min_resid = float(residuals.min()) if residuals.size else math.inf
    status = "optimal" if min_resid >= -1e-6 else "slack-relaxed"
    return MpcSolution(
        controls=controls,
        states=tuple(states),
        cbf_residuals=residuals,
        status=status,
        cost=cost,
        iterations=iterations,
    )


def _iterate_key(it: Tuple[float, float, np.ndarray]) -> Tuple[float, float]:
    """Order iterates by violation (tolerance-floored) then cost."""
    cost, violation, _ = it
    return (0.0 if violation <= 1e-9 else violation, cost)


def _sqp(
    x_t: RobotState,
    controls: np.ndarray,
    ref: np.ndarray,
    obstacles: Sequence[Sequence[Ellipse]],
    params: PlannerParams,
    constraint_mode: str,
    u_prev: Optional[np.ndarray] = None,
) -> Tuple[Tuple[float, float, np.ndarray], int, bool]:
    """Trust-region SQP from one initialization.

    Returns ((cost, violation, controls) of the best iterate ordered by
    violation then cost, iteration count, whether any QP solved).
    """
    n = params.horizon
    cost, violation, _, _ = _merit_terms(
        x_t, controls, ref, obstacles, params, constraint_mode
    )
    merit = cost + params.slack_penalty * violation
    best = (cost, violation, controls)

    radius = params.trust_region
    iterations = 0
    qp_succeeded = False
    stall = 0
    for _ in range(params.sqp_max_iter):
        iterations += 1
        sub = _Subproblem(
            x_t, controls, ref, obstacles, params, constraint_mode, radius, u_prev
        )
        lb = np.maximum(np.tile(params.u_lower, n) - controls.ravel(), -radius)
        ub = np.minimum(np.tile(params.u_upper, n) - controls.ravel(), radius)
        du = _solve_qp(sub, lb, ub, params)
        if du is None:
            radius *= 0.5
            if radius < 1e-4:
                break
            continue
        qp_succeeded = True
        candidate = _rate_project(controls + du.reshape(n, 2), u_prev, params)
        c_cost, c_viol, _, _ = _merit_terms(
            x_t, candidate, ref, obstacles, params, constraint_mode
        )
        c_merit = c_cost + params.slack_penalty * c_viol
        if _iterate_key((c_cost, c_viol, candidate)) < _iterate_key(best):
            best = (c_cost, c_viol, candidate)
        if c_merit <= merit - 1e-12:
            step = float(np.max(np.abs(du)))
            improvement = merit - c_merit
            controls = candidate
            merit = c_merit
            # expand only on substantial full steps; a tiny accepted step
            # re-inflating the radius causes shrink/expand oscillation
            if step >= 0.999 * radius and improvement > params.sqp_tol:
                radius = min(params.trust_region, 2.0 * radius)
            if step < params.sqp_tol or (improvement < params.sqp_tol and step < 0.1):
                break
            stall = stall + 1 if improvement < params.sqp_tol else 0
        else:
            radius *= 0.5
            stall += 1
            if radius < 1e-4:
                break
        if stall >= 3:
            break
    return best, iterations, qp_succeeded


def shift_warm_start(solution: MpcSolution) -> np.ndarray:
    """Previous plan advanced one step: drop u_0, repeat the last input."""
    controls = solution.controls
    return np.vstack([controls[1:], controls[-1:]])


def curvefit_predict(
    centers: np.ndarray,
    shape_from: Ellipse,
    horizon: int,
    dt: float,
    degree: int = 2,
    window: int = 10,
) -> Tuple[Ellipse, ...]:
    """Obstacle chain from a least-squares polynomial fit of past centers.

    Fits x(t), y(t) over the last ``window`` centers (degree limited by
    the sample count) and extrapolates over the horizon; the shape is
    carried over from the current detection.
    """
    pts = np.asarray(centers, float).reshape(-1, 2)[-window:]
    m = len(pts)
    if m < 2:
        return (shape_from,)
    deg = min(degree, m - 1)
    t_past = np.arange(-(m - 1), 1, dtype=float) * dt
    cx = np.polyfit(t_past, pts[:, 0], deg)
    cy = np.polyfit(t_past, pts[:, 1], deg)
    t_fut = np.arange(horizon + 1, dtype=float) * dt
    xs = np.polyval(cx, t_fut)
    ys = np.polyval(cy, t_fut)
    return tuple(
        Ellipse(float(x), float(y), shape_from.a, shape_from.b, shape_from.theta)
        for x, y in zip(xs, ys)
    )


def plan_variant(
    kind: str,
    x_t: RobotState,
    reference: Sequence[RobotState],
    predictions: Sequence[PredictedObstacle],
    detections: Sequence,
    center_histories: Optional[Dict[int, np.ndarray]] = None,
    params: Optional[PlannerParams] = None,
    warm_start: Optional[np.ndarray] = None,
    u_prev: Optional[np.ndarray] = None,
) -> MpcSolution:
    """Dispatch to one of the five planner variants.

    mpc-euclid   frozen current ellipses, plain keep-out distance
    mpc-cbf      frozen current ellipses, barrier decay constraint
    mpc-kf       filter-predicted inflated ellipses, keep-out (no decay)
    mpc-cbf-curvefit  polynomial-fit obstacle chain, barrier decay
    mpc-dcbf     filter-predicted inflated ellipses, barrier decay
    """
    if kind not in PLANNER_KINDS:
        raise ValueError(f"unknown planner kind {kind!r}; valid: {PLANNER_KINDS}")
    params = params or PlannerParams()

    if kind in ("mpc-dcbf", "mpc-kf"):
        seqs: List[Sequence[Ellipse]] = [p.ellipses for p in predictions]
        mode = "dcbf" if kind == "mpc-dcbf" else "keepout"
    elif kind in ("mpc-euclid", "mpc-cbf"):
        seqs = [(d.ellipse,) for d in detections]
        mode = "keepout" if kind == "mpc-euclid" else "dcbf"
    else:  # mpc-cbf-curvefit
        histories = center_histories or {}
        seqs = []
        for d in detections:
            centers = histories.get(d.label, np.array([[d.ellipse.cx, d.ellipse.cy]]))
            seqs.append(
                curvefit_predict(centers, d.ellipse, params.horizon, params.dt)
            )
        mode = "dcbf"
    return solve(
        x_t, reference, seqs, params, warm_start, constraint_mode=mode, u_prev=u_prev
    )
