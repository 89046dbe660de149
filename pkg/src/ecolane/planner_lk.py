"""Lane-keeping planner: an energy-aware longitudinal speed profile.

The horizon (N steps of dt) is transcribed in condensed form. Decision
variables are the per-step speed increments u_i = torque_i * dt / (m * r_eff)
(so |u_i| is the speed change of one step, which keeps the QP subproblems
well scaled) plus, when the energy weight is positive, epigraph variables
sigma_i >= dt/c2 * (c1*T_i*v_i + c2*v_i), sigma_i >= 0, so that
sum(sigma) * c2 is the planned clamped energy. Speeds and positions are
affine in u:

    v_i = v0 + sum_{j<i} u_j
    s_i = s0 + i*dt*v0 + dt * sum_j max(i-1-j, 0) * u_j

Constraints: speed band 0 <= v <= v_max, torque box as variable bounds, and
a headway rule per predicted front vehicle

    s_front_i - s_i >= d_safe + (v_i - v_front) * t_gap     (i = 0..N)

with each front rolled out at its (optional) constant acceleration, held at
zero speed once stopped. A NONPASS stop is imposed by the caller as a virtual
stopped front at the stop line plus a braking speed reference from
``build_reference``.

If the current state already violates a headway row, the rows are relaxed by
one shared slack with a stiff quadratic penalty; if the solve still fails,
``plan_lk`` returns a full-braking emergency profile rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ecolane import nlp
from ecolane.dynamics import VehicleParams
from ecolane.energy import EnergyModelParams, meter_trajectory
from ecolane.trajectory import PlannedTrajectory
from ecolane.world import RoadNetwork

D_SAFE = 10.0
T_GAP = 1.0
HORIZON = 50
DT = 0.1


@dataclass(frozen=True)
class LkWeights:
    track: float = 1.0
    accel: float = 2.0
    jerk: float = 1.0
    energy: float = 1.0
    slack: float = 1e4

    def __post_init__(self):
        if min(self.track, self.accel, self.jerk, self.energy, self.slack) < 0:
            raise ValueError("weights must be >= 0")


@dataclass(frozen=True)
class FrontPrediction:
    """Kinematic rollout of one vehicle ahead in the planned lane."""

    s: float
    v: float
    accel: float = 0.0

    def rollout(self, horizon: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Positions and speeds under constant acceleration, held at zero
        speed once stopped (same forward-Euler convention as the ego model).
        """
        v = np.maximum(self.v + self.accel * dt * np.arange(horizon + 1), 0.0)
        s = self.s + dt * np.concatenate([[0.0], np.cumsum(v[:-1])])
        return s, v

    def positions(self, horizon: int, dt: float) -> np.ndarray:
        return self.rollout(horizon, dt)[0]


def build_reference(
    road: RoadNetwork,
    s0: float,
    horizon: int = HORIZON,
    dt: float = DT,
    stop_s: Optional[float] = None,
    a_ramp: float = 1.5,
    standoff: float = D_SAFE,
) -> np.ndarray:
    """Speed reference along the horizon: legal speed, with a square-root
    braking ramp to rest ``standoff`` meters before ``stop_s`` when stopping.
    """
    ref = np.empty(horizon + 1)
    s = s0
    for i in range(horizon + 1):
        cap = road.legal_speed_at(s)
        if stop_s is not None:
            dist = max(stop_s - standoff - s, 0.0)
            cap = min(cap, math.sqrt(2.0 * a_ramp * dist))
        ref[i] = cap
        s += dt * cap
    return ref


def _emergency_profile(
    s0: float,
    v0: float,
    vehicle: VehicleParams,
    horizon: int,
    dt: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Brake at the torque floor until rest, never crossing zero speed."""
    beta = dt * vehicle.accel_gain
    v = np.empty(horizon + 1)
    s = np.empty(horizon + 1)
    torque = np.empty(horizon)
    v[0], s[0] = v0, s0
    for i in range(horizon):
        torque[i] = max(vehicle.torque_min, -v[i] / beta)
        v[i + 1] = v[i] + beta * torque[i]
        s[i + 1] = s[i] + dt * v[i]
    return s, v, torque


def plan_lk(
    s0: float,
    v0: float,
    v_ref: np.ndarray,
    fronts: Union[None, FrontPrediction, Sequence[FrontPrediction]] = None,
    vehicle: VehicleParams = VehicleParams(),
    energy_params: EnergyModelParams = EnergyModelParams(),
    weights: LkWeights = LkWeights(),
    u_pin: Optional[float] = None,
    e_y: float = 0.0,
    kappa_road: Union[float, np.ndarray] = 0.0,
    t0: float = 0.0,
    horizon: int = HORIZON,
    dt: float = DT,
    d_safe: float = D_SAFE,
    t_gap: float = T_GAP,
    options: Optional[nlp.SqpOptions] = None,
) -> PlannedTrajectory:
    """Plan a lane-keeping trajectory from (s0, v0).

    v_ref has length horizon+1 and is tracked at steps 1..N. ``u_pin`` pins
    the first torque (the input already committed for the current interval).
    Returns a PlannedTrajectory of kind "lk", or kind "emergency" when no
    acceptable solution exists.
    """
    if v_ref.shape != (horizon + 1,):
        raise ValueError(f"v_ref must have shape ({horizon + 1},)")
    if isinstance(fronts, FrontPrediction):
        fronts = [fronts]
    fronts = list(fronts or [])

    n_steps = horizon
    beta = dt * vehicle.accel_gain
    kappa_arr = np.broadcast_to(np.asarray(kappa_road, dtype=float), (n_steps,)).copy()

    # initial headway violation forces the soft-slack formulation up front
    needs_slack = any(
        f.s - s0 < d_safe + (v0 - f.v) * t_gap - 1e-9 for f in fronts
    )

    attempt_order = (needs_slack,) if needs_slack else (False, True)
    last_sol = None
    for use_slack in attempt_order:
        sol, arrays = _solve_lk(
            s0, v0, v_ref, fronts, vehicle, energy_params, weights, u_pin,
            n_steps, dt, d_safe, t_gap, use_slack, options,
        )
        last_sol = sol
        feas = sol.kkt.get("feasibility", np.inf)
        if sol.ok or (sol.status is nlp.NlpStatus.MAX_ITER and feas <= 1e-7):
            s_arr, v_arr, torque = arrays
            meta = {
                "iterations": sol.iterations,
                "kkt": sol.kkt,
                "planned_energy_j": meter_trajectory(energy_params, torque, v_arr[:-1], dt),
                "headway_slack": float(sol.x[-1]) if use_slack else 0.0,
            }
            return PlannedTrajectory.from_longitudinal(
                t0, s_arr, v_arr, torque, e_y, kappa_arr, dt,
                kind="lk", status=sol.status.value, meta=meta,
            )
        if not fronts:
            break  # slack only relaxes headway rows; nothing else to retry

    s_arr, v_arr, torque = _emergency_profile(s0, v0, vehicle, n_steps, dt)
    meta = {
        "planned_energy_j": meter_trajectory(energy_params, torque, v_arr[:-1], dt),
        "solver_message": last_sol.message if last_sol else "",
    }
    return PlannedTrajectory.from_longitudinal(
        t0, s_arr, v_arr, torque, e_y, kappa_arr, dt,
        kind="emergency", status="Emergency", meta=meta,
    )


def _solve_lk(
    s0, v0, v_ref, fronts, vehicle, energy_params, weights, u_pin,
    n_steps, dt, d_safe, t_gap, use_slack, options,
):
    n_f = len(fronts)
    with_energy = weights.energy > 0.0
    beta = dt * vehicle.accel_gain
    gamma = energy_params.c1 / (energy_params.c2 * vehicle.accel_gain) if with_energy else 0.0

    nu = n_steps
    n = nu + (n_steps if with_energy else 0) + (1 if use_slack else 0)
    sl_sigma = slice(nu, nu + n_steps) if with_energy else slice(0, 0)
    i_slack = n - 1 if use_slack else None

    # affine maps u -> v (rows 0..N) and u -> s
    mv = np.tril(np.ones((n_steps + 1, nu)), k=-1)
    ms = dt * np.maximum(np.arange(n_steps + 1)[:, None] - 1 - np.arange(nu)[None, :], 0.0)
    s_base = s0 + dt * np.arange(n_steps + 1) * v0
    mv1 = mv[1:]
    ref1 = v_ref[1:]

    dmat = np.diff(np.eye(nu), axis=0)  # (N-1, N) first differences of u

    # constant ineq rows: [-v_i; v_i - vmax] for i=1..N, then headway, then epigraph
    rows = []
    rhs_const = []
    rows.append(np.hstack([-mv1, np.zeros((n_steps, n - nu))]))
    rhs_const.append(np.full(n_steps, -v0))
    rows.append(np.hstack([mv1, np.zeros((n_steps, n - nu))]))
    rhs_const.append(np.full(n_steps, v0 - vehicle.v_max))
    for f in fronts:
        f_pos, f_spd = f.rollout(n_steps, dt)
        blk = np.zeros((n_steps + 1, n))
        blk[:, :nu] = ms + t_gap * mv
        if use_slack:
            blk[:, i_slack] = -1.0
        rows.append(blk)
        rhs_const.append(s_base + d_safe + (v0 - f_spd) * t_gap - f_pos)
    n_lin = 2 * n_steps + n_f * (n_steps + 1)
    if with_energy:
        blk = np.zeros((n_steps, n))
        blk[:, :nu] = dt * mv[:n_steps]
        blk[:, sl_sigma] = -np.eye(n_steps)
        rows.append(blk)
        rhs_const.append(np.full(n_steps, dt * v0))
    jac_base = np.vstack(rows)
    rhs_base = np.concatenate(rhs_const)
    epi_rows = slice(n_lin, n_lin + n_steps)

    def speeds(u):
        return v0 + mv @ u

    def ineq_con(z):
        u = z[:nu]
        h = jac_base @ z + rhs_base
        if with_energy:
            v = speeds(u)
            h[epi_rows] += gamma * u * v[:n_steps]
        return h

    def ineq_jac(z):
        u = z[:nu]
        jac = jac_base.copy()
        if with_energy:
            v = speeds(u)
            jac[epi_rows, :nu] += gamma * (np.diag(v[:n_steps]) + u[:, None] * mv[:n_steps])
        return jac

    h_obj = np.zeros((n, n))
    h_obj[:nu, :nu] = (
        2.0 * weights.track * mv1.T @ mv1
        + 2.0 * weights.accel * np.eye(nu)
        + 2.0 * weights.jerk * dmat.T @ dmat
    )
    if use_slack:
        h_obj[i_slack, i_slack] = 2.0 * weights.slack

    def objective(z):
        u = z[:nu]
        dv = mv1 @ u + (v0 - ref1)
        val = (
            weights.track * float(dv @ dv)
            + weights.accel * float(u @ u)
            + weights.jerk * float(np.sum(np.diff(u) ** 2))
        )
        if with_energy:
            val += weights.energy * float(np.sum(z[sl_sigma]))
        if use_slack:
            val += weights.slack * z[i_slack] ** 2
        return val

    def gradient(z):
        u = z[:nu]
        g = np.zeros(n)
        g[:nu] = (
            2.0 * weights.track * mv1.T @ (mv1 @ u + (v0 - ref1))
            + 2.0 * weights.accel * u
            + 2.0 * weights.jerk * dmat.T @ (dmat @ u)
        )
        if with_energy:
            g[sl_sigma] = weights.energy
        if use_slack:
            g[i_slack] = 2.0 * weights.slack * z[i_slack]
        return g

    eg = np.eye(nu) + mv[:n_steps] if with_energy else None

    def hessian(z, lam_eq, lam_in):
        hess = h_obj.copy()
        if with_energy:
            lam = np.maximum(lam_in[epi_rows], 0.0)
            # positive-definite surrogate of the bilinear epigraph curvature
            hess[:nu, :nu] += eg.T @ (eg * (0.5 * gamma * lam)[:, None])
        return hess

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[:nu] = beta * vehicle.torque_min
    ub[:nu] = beta * vehicle.torque_max
    if with_energy:
        lb[sl_sigma] = 0.0
    if use_slack:
        lb[i_slack] = 0.0
    if u_pin is not None:
        pin = float(np.clip(beta * u_pin, lb[0], ub[0]))
        lb[0] = ub[0] = pin

    # greedy tracking rollout as the start point
    u_start = np.zeros(nu)
    v_roll = v0
    for i in range(nu):
        want = v_ref[i + 1] - v_roll
        u_start[i] = float(np.clip(want, lb[i], ub[i]))
        u_start[i] = max(u_start[i], -v_roll)
        v_roll += u_start[i]
    if u_pin is not None:
        u_start[0] = lb[0]
    z0 = np.zeros(n)
    z0[:nu] = u_start
    if with_energy:
        v_all = speeds(u_start)
        z0[sl_sigma] = np.maximum(gamma * u_start * v_all[:n_steps] + dt * v_all[:n_steps], 0.0)
    if use_slack:
        z0[i_slack] = max(0.0, float(np.max(ineq_con(z0)[:n_lin], initial=0.0))) + 1.0

    problem = nlp.NlpProblem(
        n=n,
        objective=objective,
        gradient=gradient,
        ineq_con=ineq_con,
        ineq_jac=ineq_jac,
        hessian=hessian,
        lb=lb,
        ub=ub,
        name="lk",
    )
    sol = nlp.solve(problem, z0, options or nlp.SqpOptions(max_iter=80))

    u = sol.x[:nu]
    v_arr = speeds(u)
    s_arr = s_base + ms @ u
    torque = u / beta
    return sol, (s_arr, v_arr, torque)
