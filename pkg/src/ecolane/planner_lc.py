"""Lane-change planner: full-horizon transcription with dual obstacle avoidance.

Decision vector (horizon N, S surrounding vehicles):

    z = [ x_0..x_N | u_0..u_{N-1} | lambda^1_0..lambda^1_N | ... lambda^S_N ]

with states x = [s, v, e_y, e_psi], inputs u = [uhat, kappa] where
uhat = torque * dt / (m * r_eff) is the per-step speed increment (same
scaling as the lane-keeping planner), and lambda^j_i in R^4_{>=0} the dual
certificate of clearance from vehicle j at step i.

Dynamics enter as equality constraints (forward Euler of the Frenet
point-mass model). Obstacles are solid rectangles, axis aligned in the
Frenet frame, rolled out at constant speed and enlarged by the ego's half
dimensions so the ego itself reduces to its center point p = (s, e_y). With
A = [[1,0],[-1,0],[0,1],[0,-1]] and b_i the enlarged box's offsets, the pair

    (A p_i - b_i)' lambda_i >= d_min,   ||A' lambda_i||^2 <= 1,  lambda_i >= 0

certifies dist(p_i, box_i) >= d_min by weak duality. Terminal membership in
the chosen free-space gap, the target lane band, and the heading band are
plain variable bounds on x_N.

The solved input sequence is re-rolled through the raw Euler model so the
returned trajectory is dynamically consistent to machine precision; the
optimizer's equality tolerance would otherwise leave ~1e-8 defects.

``plan_lc`` raises LaneChangeInfeasible when no usable gap exists or the
solver cannot produce an acceptably feasible trajectory; the caller is
expected to fall back to lane keeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from ecolane import nlp
from ecolane.dynamics import VehicleParams
from ecolane.energy import EnergyModelParams, meter_trajectory
from ecolane.trajectory import PlannedTrajectory
from ecolane.world import RoadNetwork, lane_center_offset

D_MIN = 0.5
HORIZON = 50
DT = 0.1


class LaneChangeInfeasible(RuntimeError):
    """No admissible lane-change trajectory; the caller should keep the lane."""


@dataclass(frozen=True)
class LcWeights:
    dv1: float = 1.0
    dv2: float = 10.0
    dk1: float = 1.0
    dk2: float = 10.0
    y: float = 10.0
    psi: float = 10.0


@dataclass(frozen=True)
class LcBounds:
    e_y_lo: float
    e_y_hi: float
    e_psi_bnd: float = 0.5 * math.pi
    kappa_bnd: float = 0.1
    ay_bnd: float = 3.0
    terminal_y_tol: float = 0.1
    terminal_psi_tol: float = 0.1

    @classmethod
    def from_road(cls, road: RoadNetwork, vehicle: VehicleParams) -> "LcBounds":
        lo = -road.lane_width / 2.0 + vehicle.width / 2.0
        hi = (road.lane_count - 1) * road.lane_width + road.lane_width / 2.0 - vehicle.width / 2.0
        return cls(e_y_lo=lo, e_y_hi=hi)


@dataclass(frozen=True)
class SvPolytope:
    """A surrounding vehicle as a constant-speed rectangle in the Frenet frame."""

    s: float
    v: float
    e_y: float
    length: float = 5.0
    width: float = 2.0

    def centers(self, horizon: int, dt: float) -> np.ndarray:
        return self.s + dt * self.v * np.arange(horizon + 1)


@dataclass(frozen=True)
class FreeSpaceGap:
    """Admissible terminal band for the ego center in the target lane."""

    lo: float
    hi: float

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, s: float) -> bool:
        return self.lo <= s <= self.hi


def enlarge_sv(sv: SvPolytope, vehicle: VehicleParams) -> tuple[float, float]:
    """Half extents of the obstacle box after absorbing the ego's footprint."""
    return (sv.length + vehicle.length) / 2.0, (sv.width + vehicle.width) / 2.0


def rect_distance(p_s: float, p_y: float, c_s: float, c_y: float, half_l: float, half_w: float) -> float:
    """Euclidean distance from a point to a solid axis-aligned rectangle."""
    dx = max(abs(p_s - c_s) - half_l, 0.0)
    dy = max(abs(p_y - c_y) - half_w, 0.0)
    return math.hypot(dx, dy)


# ---------------------------------------------------------------------------
# free-space gap policy

def enumerate_gaps(
    svs: Sequence[SvPolytope],
    y_target: float,
    lane_width: float,
    vehicle: VehicleParams,
    horizon: int = HORIZON,
    dt: float = DT,
    d_min: float = D_MIN,
) -> list[FreeSpaceGap]:
    """Gaps between target-lane vehicle footprints at the terminal step.

    Footprints are enlarged by the ego half length plus d_min, so any point
    of a gap keeps at least d_min longitudinal clearance.
    """
    t_end = horizon * dt
    spans = []
    for sv in svs:
        if abs(sv.e_y - y_target) > lane_width / 2.0:
            continue
        half_l, _ = enlarge_sv(sv, vehicle)
        c = sv.s + t_end * sv.v
        spans.append((c - half_l - d_min, c + half_l + d_min))
    spans.sort()
    merged: list[list[float]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    gaps = []
    cursor = -math.inf
    for lo, hi in merged:
        gaps.append(FreeSpaceGap(cursor, lo))
        cursor = hi
    gaps.append(FreeSpaceGap(cursor, math.inf))
    return gaps


def _reach_interval(v0: float, vehicle: VehicleParams, horizon: int, dt: float) -> tuple[float, float]:
    beta = dt * vehicle.accel_gain
    lo = hi = 0.0
    v_lo = v_hi = v0
    for _ in range(horizon):
        lo += dt * v_lo
        hi += dt * v_hi
        v_lo = max(0.0, v_lo + beta * vehicle.torque_min)
        v_hi = min(vehicle.v_max, v_hi + beta * vehicle.torque_max)
    return lo, hi


def select_free_space(
    gaps: Sequence[FreeSpaceGap],
    s0: float,
    v0: float,
    vehicle: VehicleParams,
    horizon: int = HORIZON,
    dt: float = DT,
    d_safe: float = 10.0,
    d_min: float = D_MIN,
) -> FreeSpaceGap:
    """Pick the terminal gap: the one holding the constant-speed projection
    when wide enough, otherwise the longest gap whose midpoint is reachable
    under the torque limits, ties going to the least speed change.
    """
    s_proj = s0 + horizon * dt * v0
    min_len = max(2.0 * d_safe, vehicle.length + 2.0 * d_min)
    reach_lo, reach_hi = _reach_interval(v0, vehicle, horizon, dt)
    lo, hi = s0 + reach_lo, s0 + reach_hi

    containing = next((g for g in gaps if g.contains(s_proj)), None)
    if containing is not None and containing.length >= min_len:
        return containing

    def representative(g: FreeSpaceGap) -> float:
        # the point of the gap the ego would aim for, clipped away from walls
        lo_in = g.lo + min_len / 2.0 if math.isfinite(g.lo) else -math.inf
        hi_in = g.hi - min_len / 2.0 if math.isfinite(g.hi) else math.inf
        return float(np.clip(s_proj, lo_in, hi_in))

    usable = [
        g for g in gaps
        if g.length >= min_len and lo <= representative(g) <= hi
    ]
    if not usable:
        raise LaneChangeInfeasible("no reachable free-space gap in the target lane")
    best_len = max(g.length for g in usable)
    best = [g for g in usable if g.length == best_len]
    return min(best, key=lambda g: abs(representative(g) - s_proj))


# ---------------------------------------------------------------------------
# planner

def plan_lc(
    state: np.ndarray,
    target_lane: int,
    road: RoadNetwork,
    svs: Sequence[SvPolytope] = (),
    vehicle: VehicleParams = VehicleParams(),
    energy_params: EnergyModelParams = EnergyModelParams(),
    weights: LcWeights = LcWeights(),
    bounds: Optional[LcBounds] = None,
    gap: Optional[FreeSpaceGap] = None,
    u_pin: Optional[tuple[float, float]] = None,
    t0: float = 0.0,
    horizon: int = HORIZON,
    dt: float = DT,
    d_min: float = D_MIN,
    d_safe: float = 10.0,
    options: Optional[nlp.SqpOptions] = None,
) -> PlannedTrajectory:
    """Plan one complete lane change from state = [s, v, e_y, e_psi].

    ``svs`` are all vehicles to stay clear of (either lane). ``gap`` fixes the
    terminal free-space band; by default it is chosen by ``select_free_space``
    over the target lane. ``u_pin`` is the committed (torque, kappa) for the
    first interval. Raises LaneChangeInfeasible when no trajectory is found.
    """
    state = np.asarray(state, dtype=float)
    if state.shape != (4,):
        raise ValueError("state must be [s, v, e_y, e_psi]")
    s0, v0, ey0, psi0 = (float(a) for a in state)
    y_t = lane_center_offset(road, target_lane)
    bnd = bounds or LcBounds.from_road(road, vehicle)
    if gap is None:
        gaps = enumerate_gaps(list(svs), y_t, road.lane_width, vehicle, horizon, dt, d_min)
        gap = select_free_space(gaps, s0, v0, vehicle, horizon, dt, d_safe, d_min)

    n_sv = len(svs)
    n_steps = horizon
    beta = dt * vehicle.accel_gain
    nx = 4 * (n_steps + 1)
    nu = 2 * n_steps
    nlam = 4 * (n_steps + 1)
    n = nx + nu + n_sv * nlam

    idx_s = 4 * np.arange(n_steps + 1)
    idx_v = idx_s + 1
    idx_ey = idx_s + 2
    idx_psi = idx_s + 3
    idx_uhat = nx + 2 * np.arange(n_steps)
    idx_kappa = idx_uhat + 1

    def lam_block(j: int) -> np.ndarray:
        return nx + nu + j * nlam + np.arange(nlam)

    # warm start: smoothstep lateral blend at gap-aligned speed
    s_goal = float(np.clip(s0 + n_steps * dt * v0, gap.lo, gap.hi))
    if not math.isfinite(s_goal):
        s_goal = s0 + n_steps * dt * v0
    v_end = max(0.0, 2.0 * (s_goal - s0) / (n_steps * dt) - v0)
    v_end = min(v_end, vehicle.v_max)
    tau = np.arange(n_steps + 1) / n_steps
    v_ws = v0 + (v_end - v0) * tau
    s_ws = np.empty(n_steps + 1)
    s_ws[0] = s0
    s_ws[1:] = s0 + np.cumsum(dt * v_ws[:-1])
    blend = 3.0 * tau**2 - 2.0 * tau**3
    ey_ws = ey0 + (y_t - ey0) * blend
    dey_dt = np.gradient(ey_ws, dt)
    psi_ws = np.arcsin(np.clip(dey_dt / np.maximum(v_ws, 0.5), -0.9, 0.9))
    psi_ws[0] = psi0
    kappa_road_arr = np.array([road.curvature_at(float(s)) for s in s_ws[:-1]])
    kappa_ws = kappa_road_arr + np.diff(psi_ws) / (dt * np.maximum(v_ws[:-1] * np.cos(psi_ws[:-1]), 0.5))
    kappa_ws = np.clip(kappa_ws, -bnd.kappa_bnd, bnd.kappa_bnd)
    uhat_ws = np.diff(v_ws)

    sv_boxes = []
    for sv in svs:
        half_l, half_w = enlarge_sv(sv, vehicle)
        sv_boxes.append((sv.centers(n_steps, dt), sv.e_y, half_l, half_w))

    z0 = np.zeros(n)
    z0[idx_s] = s_ws
    z0[idx_v] = v_ws
    z0[idx_ey] = ey_ws
    z0[idx_psi] = psi_ws
    z0[idx_uhat] = uhat_ws
    z0[idx_kappa] = kappa_ws
    for j, (c_s, c_y, half_l, half_w) in enumerate(sv_boxes):
        lam = np.zeros((n_steps + 1, 4))
        dx = s_ws - c_s
        dy = ey_ws - c_y
        out_s = np.sign(dx) * np.maximum(np.abs(dx) - half_l, 0.0)
        out_y = np.sign(dy) * np.maximum(np.abs(dy) - half_w, 0.0)
        norm = np.hypot(out_s, out_y)
        with np.errstate(invalid="ignore", divide="ignore"):
            dir_s = np.where(norm > 0, out_s / norm, 0.0)
            dir_y = np.where(norm > 0, out_y / norm, 0.0)
        lam[:, 0] = np.maximum(dir_s, 0.0)
        lam[:, 1] = np.maximum(-dir_s, 0.0)
        lam[:, 2] = np.maximum(dir_y, 0.0)
        lam[:, 3] = np.maximum(-dir_y, 0.0)
        z0[lam_block(j)] = lam.ravel()

    # ----- constraint callbacks -------------------------------------------

    def eq_con(z):
        s_arr, v_arr = z[idx_s], z[idx_v]
        ey, psi = z[idx_ey], z[idx_psi]
        uhat, kappa = z[idx_uhat], z[idx_kappa]
        cpsi, spsi = np.cos(psi[:-1]), np.sin(psi[:-1])
        r1 = s_arr[1:] - s_arr[:-1] - dt * v_arr[:-1] * cpsi
        r2 = v_arr[1:] - v_arr[:-1] - uhat
        r3 = ey[1:] - ey[:-1] - dt * v_arr[:-1] * spsi
        r4 = psi[1:] - psi[:-1] - dt * (kappa - kappa_road_arr) * v_arr[:-1] * cpsi
        return np.stack([r1, r2, r3, r4], axis=1).ravel()

    def eq_jac(z):
        v_arr, psi = z[idx_v], z[idx_psi]
        kappa = z[idx_kappa]
        cpsi, spsi = np.cos(psi[:-1]), np.sin(psi[:-1])
        vi = v_arr[:-1]
        dk = kappa - kappa_road_arr
        rows, cols, vals = [], [], []
        r = 4 * np.arange(n_steps)

        def put(rr, cc, vv):
            rows.append(rr)
            cols.append(cc)
            vals.append(vv)

        ones = np.ones(n_steps)
        # r1 = s+ - s - dt v cos(psi)
        put(r, idx_s[:-1], -ones)
        put(r, idx_s[1:], ones)
        put(r, idx_v[:-1], -dt * cpsi)
        put(r, idx_psi[:-1], dt * vi * spsi)
        # r2 = v+ - v - uhat
        put(r + 1, idx_v[:-1], -ones)
        put(r + 1, idx_v[1:], ones)
        put(r + 1, idx_uhat, -ones)
        # r3 = ey+ - ey - dt v sin(psi)
        put(r + 2, idx_ey[:-1], -ones)
        put(r + 2, idx_ey[1:], ones)
        put(r + 2, idx_v[:-1], -dt * spsi)
        put(r + 2, idx_psi[:-1], -dt * vi * cpsi)
        # r4 = psi+ - psi - dt (kappa - kappa_road) v cos(psi)
        put(r + 3, idx_psi[:-1], -ones + dt * dk * vi * spsi)
        put(r + 3, idx_psi[1:], ones)
        put(r + 3, idx_v[:-1], -dt * dk * cpsi)
        put(r + 3, idx_kappa, -dt * vi * cpsi)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(4 * n_steps, n),
        )

    n_ay = 2 * n_steps
    n_ob = 2 * (n_steps + 1)

    def ineq_con(z):
        v_arr = z[idx_v]
        kappa = z[idx_kappa]
        ay = v_arr[:-1] ** 2 * kappa
        parts = [ay - bnd.ay_bnd, -ay - bnd.ay_bnd]
        s_arr, ey = z[idx_s], z[idx_ey]
        for j, (c_s, c_y, half_l, half_w) in enumerate(sv_boxes):
            lam = z[lam_block(j)].reshape(n_steps + 1, 4)
            e1 = s_arr - c_s - half_l
            e2 = -s_arr + c_s - half_l
            e3 = ey - c_y - half_w
            e4 = -ey + c_y - half_w
            val = lam[:, 0] * e1 + lam[:, 1] * e2 + lam[:, 2] * e3 + lam[:, 3] * e4
            norm2 = (lam[:, 0] - lam[:, 1]) ** 2 + (lam[:, 2] - lam[:, 3]) ** 2
            parts.append(d_min - val)
            parts.append(norm2 - 1.0)
        return np.concatenate(parts)

    def ineq_jac(z):
        v_arr = z[idx_v]
        kappa = z[idx_kappa]
        rows, cols, vals = [], [], []
        r_ay = np.arange(n_steps)

        def put(rr, cc, vv):
            rows.append(rr)
            cols.append(cc)
            vals.append(vv)

        vi = v_arr[:-1]
        put(r_ay, idx_v[:-1], 2.0 * vi * kappa)
        put(r_ay, idx_kappa, vi**2)
        put(n_steps + r_ay, idx_v[:-1], -2.0 * vi * kappa)
        put(n_steps + r_ay, idx_kappa, -(vi**2))

        s_arr, ey = z[idx_s], z[idx_ey]
        base = n_ay
        for j, (c_s, c_y, half_l, half_w) in enumerate(sv_boxes):
            lam = z[lam_block(j)].reshape(n_steps + 1, 4)
            lamcols = lam_block(j).reshape(n_steps + 1, 4)
            e1 = s_arr - c_s - half_l
            e2 = -s_arr + c_s - half_l
            e3 = ey - c_y - half_w
            e4 = -ey + c_y - half_w
            r_a = base + np.arange(n_steps + 1)
            put(r_a, idx_s, -(lam[:, 0] - lam[:, 1]))
            put(r_a, idx_ey, -(lam[:, 2] - lam[:, 3]))
            put(r_a, lamcols[:, 0], -e1)
            put(r_a, lamcols[:, 1], -e2)
            put(r_a, lamcols[:, 2], -e3)
            put(r_a, lamcols[:, 3], -e4)
            r_b = r_a + (n_steps + 1)
            ds = 2.0 * (lam[:, 0] - lam[:, 1])
            dy = 2.0 * (lam[:, 2] - lam[:, 3])
            put(r_b, lamcols[:, 0], ds)
            put(r_b, lamcols[:, 1], -ds)
            put(r_b, lamcols[:, 2], dy)
            put(r_b, lamcols[:, 3], -dy)
            base += n_ob
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_ay + n_sv * n_ob, n),
        )

    # ----- objective -------------------------------------------------------

    def objective(z):
        v_arr = z[idx_v]
        kappa = z[idx_kappa]
        dv = np.diff(v_arr)
        d2v = np.diff(v_arr, 2)
        dk = np.diff(kappa)
        d2k = np.diff(kappa, 2)
        return float(
            weights.dv1 * dv @ dv
            + weights.dv2 * d2v @ d2v
            + weights.dk1 * dk @ dk
            + weights.dk2 * d2k @ d2k
            + weights.y * (z[idx_ey[-1]] - y_t) ** 2
            + weights.psi * z[idx_psi[-1]] ** 2
        )

    def _scatter_diff(g, idx, seq, w1, w2):
        d1 = np.diff(seq)
        np.add.at(g, idx[:-1], -2.0 * w1 * d1)
        np.add.at(g, idx[1:], 2.0 * w1 * d1)
        if seq.size >= 3:
            d2 = np.diff(seq, 2)
            np.add.at(g, idx[:-2], 2.0 * w2 * d2)
            np.add.at(g, idx[1:-1], -4.0 * w2 * d2)
            np.add.at(g, idx[2:], 2.0 * w2 * d2)

    def gradient(z):
        g = np.zeros(n)
        _scatter_diff(g, idx_v, z[idx_v], weights.dv1, weights.dv2)
        _scatter_diff(g, idx_kappa, z[idx_kappa], weights.dk1, weights.dk2)
        g[idx_ey[-1]] += 2.0 * weights.y * (z[idx_ey[-1]] - y_t)
        g[idx_psi[-1]] += 2.0 * weights.psi * z[idx_psi[-1]]
        return g

    # constant Gauss-Newton Hessian of the (quadratic) objective, lightly
    # damped so the QP stays positive definite on the dual block too
    h_dense = np.zeros((n, n))
    dmat_v = np.diff(np.eye(n_steps + 1), axis=0)
    d2mat_v = np.diff(np.eye(n_steps + 1), n=2, axis=0)
    h_dense[np.ix_(idx_v, idx_v)] = 2.0 * (
        weights.dv1 * dmat_v.T @ dmat_v + weights.dv2 * d2mat_v.T @ d2mat_v
    )
    dmat_k = np.diff(np.eye(n_steps), axis=0)
    d2mat_k = np.diff(np.eye(n_steps), n=2, axis=0)
    h_dense[np.ix_(idx_kappa, idx_kappa)] = 2.0 * (
        weights.dk1 * dmat_k.T @ dmat_k + weights.dk2 * d2mat_k.T @ d2mat_k
    )
    h_dense[idx_ey[-1], idx_ey[-1]] += 2.0 * weights.y
    h_dense[idx_psi[-1], idx_psi[-1]] += 2.0 * weights.psi
    h_dense += 1e-8 * np.eye(n)
    for j in range(n_sv):
        blk = lam_block(j)
        h_dense[blk, blk] += 1e-6
    h_const = sp.csr_matrix(h_dense)

    def hessian(z, lam_eq, lam_in):
        return h_const

    # ----- bounds ----------------------------------------------------------

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[idx_v] = 0.0
    ub[idx_v] = vehicle.v_max
    lb[idx_ey] = bnd.e_y_lo
    ub[idx_ey] = bnd.e_y_hi
    lb[idx_psi] = -bnd.e_psi_bnd
    ub[idx_psi] = bnd.e_psi_bnd
    lb[idx_uhat] = beta * vehicle.torque_min
    ub[idx_uhat] = beta * vehicle.torque_max
    lb[idx_kappa] = -bnd.kappa_bnd
    ub[idx_kappa] = bnd.kappa_bnd
    for j in range(n_sv):
        lb[lam_block(j)] = 0.0
    # initial state and committed input pins
    for k, val in enumerate((s0, v0, ey0, psi0)):
        lb[k] = ub[k] = val
    if u_pin is not None:
        pin_u = float(np.clip(beta * u_pin[0], lb[idx_uhat[0]], ub[idx_uhat[0]]))
        pin_k = float(np.clip(u_pin[1], lb[idx_kappa[0]], ub[idx_kappa[0]]))
        lb[idx_uhat[0]] = ub[idx_uhat[0]] = pin_u
        lb[idx_kappa[0]] = ub[idx_kappa[0]] = pin_k
    # terminal sets
    lb[idx_ey[-1]] = max(lb[idx_ey[-1]], y_t - bnd.terminal_y_tol)
    ub[idx_ey[-1]] = min(ub[idx_ey[-1]], y_t + bnd.terminal_y_tol)
    lb[idx_psi[-1]] = max(lb[idx_psi[-1]], -bnd.terminal_psi_tol)
    ub[idx_psi[-1]] = min(ub[idx_psi[-1]], bnd.terminal_psi_tol)
    if math.isfinite(gap.lo):
        lb[idx_s[-1]] = gap.lo
    if math.isfinite(gap.hi):
        ub[idx_s[-1]] = gap.hi

    z0 = np.clip(z0, lb, ub)

    problem = nlp.NlpProblem(
        n=n,
        objective=objective,
        gradient=gradient,
        eq_con=eq_con,
        eq_jac=eq_jac,
        ineq_con=ineq_con,
        ineq_jac=ineq_jac,
        hessian=hessian,
        lb=lb,
        ub=ub,
        name="lc",
    )
    sol = nlp.solve(problem, z0, options or nlp.SqpOptions(max_iter=60))
    feas = sol.kkt.get("feasibility", np.inf)
    if not (sol.ok or (sol.status is nlp.NlpStatus.MAX_ITER and feas <= 1e-7)):
        raise LaneChangeInfeasible(f"lane-change solve failed: {sol.status.value} {sol.message}")

    # re-roll the states from the solved inputs for exact dynamic consistency
    uhat = sol.x[idx_uhat]
    kappa = sol.x[idx_kappa]
    s_arr = np.empty(n_steps + 1)
    v_arr = np.empty(n_steps + 1)
    ey_arr = np.empty(n_steps + 1)
    psi_arr = np.empty(n_steps + 1)
    s_arr[0], v_arr[0], ey_arr[0], psi_arr[0] = s0, v0, ey0, psi0
    for i in range(n_steps):
        c = math.cos(psi_arr[i])
        s_arr[i + 1] = s_arr[i] + dt * v_arr[i] * c
        v_arr[i + 1] = v_arr[i] + uhat[i]
        ey_arr[i + 1] = ey_arr[i] + dt * v_arr[i] * math.sin(psi_arr[i])
        psi_arr[i + 1] = psi_arr[i] + dt * (kappa[i] - kappa_road_arr[i]) * v_arr[i] * c
    torque = uhat / beta

    meta = {
        "iterations": sol.iterations,
        "kkt": sol.kkt,
        "gap": (gap.lo, gap.hi),
        "target_y": y_t,
        "planned_energy_j": meter_trajectory(energy_params, torque, v_arr[:-1], dt),
        # dual certificates, one 4-vector per sv per step, for post-hoc
        # weak-duality clearance audits
        "duals": np.stack(
            [sol.x[lam_block(j)].reshape(n_steps + 1, 4) for j in range(n_sv)]
        ) if n_sv else np.zeros((0, n_steps + 1, 4)),
        "sv_boxes": [tuple(box) for box in sv_boxes],
    }
    return PlannedTrajectory(
        t=t0 + dt * np.arange(n_steps + 1),
        s=s_arr,
        v=v_arr,
        e_y=ey_arr,
        e_psi=psi_arr,
        torque=torque,
        kappa=kappa.copy(),
        kappa_road=kappa_road_arr,
        kind="lc",
        status=sol.status.value,
        meta=meta,
    )


def verify_clearance(
    traj: PlannedTrajectory,
    svs: Sequence[SvPolytope],
    vehicle: VehicleParams = VehicleParams(),
    d_min: float = D_MIN,
    tol: float = 1e-4,
) -> dict:
    """Exact clearance audit of a trajectory against constant-speed obstacles.

    Distances are point-to-solid-rectangle with the obstacle enlarged by the
    ego's half dimensions (matching the planner's model). Returns ``ok``
    (every distance >= d_min - tol), the minimum distance, the (step, vehicle)
    index where it occurs, and the violation count.
    """
    min_dist = math.inf
    worst = (-1, -1)
    violations = 0
    for j, sv in enumerate(svs):
        half_l, half_w = enlarge_sv(sv, vehicle)
        centers = sv.centers(traj.horizon, traj.dt)
        for i in range(traj.horizon + 1):
            dist = rect_distance(
                float(traj.s[i]), float(traj.e_y[i]), float(centers[i]), sv.e_y, half_l, half_w
            )
            if dist < min_dist:
                min_dist = dist
                worst = (i, j)
            if dist < d_min - tol:
                violations += 1
    return {
        "ok": violations == 0,
        "min_distance": min_dist,
        "worst": worst,
        "violations": violations,
    }
