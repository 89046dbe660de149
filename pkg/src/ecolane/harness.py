"""Closed-loop microsimulation: ego policy vs scripted IDM traffic and lights.

The loop runs at dt = 0.1 s. Planning happens at 1 Hz: the lane selector
scores both lanes from SPaT and constant-speed front predictions, then either
a lane-change is launched (solved once and followed to completion, latched
until the lateral error to the target center is within 0.1 m, then snapped
onto the center) or a lane-keeping plan is refreshed. Between planning ticks
the ego replays the plan exactly (tracking is assumed perfect; the plan
waypoint becomes the state) and the executed torque/speed pairs are metered
with the clamped energy model.

Surrounding vehicles follow the IDM car-following rule in their spawn lane,
never change lanes, and treat a RED or YELLOW light as a stopped leader at
the stop line. Their parameters are drawn from one seeded generator in spawn
order (all five parameters are always drawn, then scenario overrides are
applied, so overriding one vehicle never shifts another vehicle's draws).

Anti-deadlock rule: the selector's arrival time at standstill is infinite,
which would pin a stopped ego forever even on green. For the stop constraint
only (never for lane choice), a standing ego re-evaluates PASS with the
arrival time it would have at the legal speed; green phases long enough to
clear then release the virtual stop.

Everything here is deterministic; reports contain no timestamps, so repeated
runs are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ecolane.dynamics import DT, VehicleParams
from ecolane.energy import EnergyModelParams, clamped_stage_cost, mpge
from ecolane.planner_lk import D_SAFE, FrontPrediction, LkWeights, build_reference, plan_lk
from ecolane.planner_lc import LaneChangeInfeasible, LcWeights, SvPolytope, plan_lc
from ecolane.selector import PassValue, pass_decision, select_lane
from ecolane.selector import eta_to_light as _eta
from ecolane.trajectory import PlannedTrajectory
from ecolane.world import Phase, RoadNetwork, ScenarioConfig, SpatSnapshot, lane_center_offset, spat_at

PLAN_PERIOD_TICKS = 10  # 1 Hz replanning at dt = 0.1 s
STANDSTILL_V = 0.5
STOP_SPEED = 0.1
STOP_MIN_DURATION = 0.5
SV_RELEVANCE_RANGE = 200.0


@dataclass
class IdmParams:
    desired_speed: float
    accel_max: float
    decel_comfort: float
    headway_time: float
    min_gap: float


@dataclass
class NpcRuntime:
    s: float
    v: float
    lane: int
    e_y: float
    length: float
    width: float
    idm: IdmParams
    accel: float = 0.0  # last applied accel, fed to front predictions


@dataclass(frozen=True)
class RunMetrics:
    policy: str
    seed: int
    completed: bool
    sim_time: float
    travel_time: Optional[float]
    distance_m: float
    energy_j: float
    mpge: Optional[float]
    stops: int
    lane_changes: int
    avg_speed_mps: float
    min_front_gap: Optional[float]

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "seed": self.seed,
            "completed": self.completed,
            "sim_time": self.sim_time,
            "travel_time": self.travel_time,
            "distance_m": self.distance_m,
            "energy_j": self.energy_j,
            "mpge": self.mpge,
            "stops": self.stops,
            "lane_changes": self.lane_changes,
            "avg_speed_mps": self.avg_speed_mps,
            "min_front_gap": self.min_front_gap,
        }


@dataclass
class RunResult:
    metrics: RunMetrics
    trace: list = field(default_factory=list)
    events: list = field(default_factory=list)


def idm_accel(v: float, gap: float, lead_v: float, p: IdmParams) -> float:
    """IDM acceleration toward desired speed against one leader gap [m]."""
    if gap <= 0.1:
        return -8.0
    s_star = p.min_gap + v * p.headway_time + v * (v - lead_v) / (
        2.0 * math.sqrt(p.accel_max * p.decel_comfort)
    )
    a = p.accel_max * (1.0 - (v / p.desired_speed) ** 4 - (max(s_star, 0.0) / gap) ** 2)
    return float(np.clip(a, -8.0, p.accel_max))


def step_npc(npc: NpcRuntime, leaders: list[tuple[float, float]], dt: float = DT) -> None:
    """Advance one IDM vehicle by dt against the most restrictive leader.

    ``leaders`` holds (bumper_gap, leader_speed) pairs; an empty list means
    free driving toward the desired speed.
    """
    if leaders:
        a = min(idm_accel(npc.v, gap, lv, npc.idm) for gap, lv in leaders)
    else:
        a = idm_accel(npc.v, 1e9, npc.v, npc.idm)
    npc.accel = a
    npc.s += dt * npc.v
    npc.v = max(0.0, npc.v + dt * a)


def count_stops(speeds: np.ndarray, dt: float = DT, v_thresh: float = STOP_SPEED,
                min_duration: float = STOP_MIN_DURATION) -> int:
    """Number of maximal below-threshold intervals lasting at least min_duration."""
    below = np.asarray(speeds) < v_thresh
    stops = 0
    run_len = 0
    for b in below:
        if b:
            run_len += 1
        else:
            if run_len * dt >= min_duration:
                stops += 1
            run_len = 0
    if run_len * dt >= min_duration:
        stops += 1
    return stops


def _draw_idm(rng: np.random.Generator, legal_speed: float, overrides: dict) -> IdmParams:
    # always draw all five so overrides cannot shift later vehicles' draws
    drawn = IdmParams(
        desired_speed=rng.uniform(0.8, 1.0) * legal_speed,
        accel_max=rng.uniform(1.0, 2.0),
        decel_comfort=rng.uniform(1.5, 2.5),
        headway_time=rng.uniform(1.0, 1.8),
        min_gap=rng.uniform(2.0, 3.0),
    )
    return replace(drawn, **{k: float(v) for k, v in overrides.items()})


def _fmt_eta(eta: float) -> str:
    return "inf" if math.isinf(eta) else f"{eta:.2f}"


def _next_light(scenario: ScenarioConfig, s: float, lane: int):
    best = None
    for light in scenario.lights:
        if lane in light.applies_to_lanes and light.stop_line_s > s:
            if best is None or light.stop_line_s < best.stop_line_s:
                best = light
    return best


def _lane_front(npcs: list[NpcRuntime], s: float, lane: int) -> Optional[NpcRuntime]:
    best = None
    for npc in npcs:
        if npc.lane == lane and npc.s > s and (best is None or npc.s < best.s):
            best = npc
    return best


def _score_lane(scenario: ScenarioConfig, npcs, t: float, s: float, v: float, lane: int):
    """PASS/NONPASS decision and the stop line (if any) for one lane."""
    front = _lane_front(npcs, s, lane)
    front_args = {}
    if front is not None:
        front_args = {"front_s": front.s - front.length / 2.0, "front_v": front.v}
    light = _next_light(scenario, s, lane)
    if light is None:
        # no light ahead: treat the route end as an always-green line
        eta = _eta(s, v, scenario.road.route_length, **front_args)
        open_road = SpatSnapshot(Phase.GREEN, math.inf, scenario.road.route_length)
        return pass_decision(open_road, eta), None
    snap = spat_at(light, t)
    eta = _eta(s, v, light.stop_line_s, **front_args)
    return pass_decision(snap, eta), light


def _stop_required(scenario: ScenarioConfig, decision, light, s: float, v: float, t: float) -> bool:
    """Whether the LK plan must brake for the lane's light.

    A standing ego has infinite arrival time, which would never release on
    green; re-test with the legal-speed arrival time in that case.
    """
    if light is None:
        return False
    if decision.value is PassValue.PASS:
        return False
    if v >= STANDSTILL_V:
        return True
    legal = scenario.road.legal_speed_at(s)
    snap = spat_at(light, t)
    eta_go = (light.stop_line_s - s) / legal
    return pass_decision(snap, eta_go).value is PassValue.NONPASS


def run(scenario: ScenarioConfig, policy: str = "proposed", collect_trace: bool = True) -> RunResult:
    """Simulate one policy on a scenario. policy is "baseline" or "proposed"."""
    if policy not in ("baseline", "proposed"):
        raise ValueError(f"unknown policy {policy!r}")
    road = scenario.road
    planner_cfg = scenario.planner
    vehicle = VehicleParams(**planner_cfg.get("vehicle", {}))
    energy_params = EnergyModelParams(**planner_cfg.get("energy", {}))
    lk_weights = LkWeights(**planner_cfg.get("lk_weights", {}))
    if policy == "baseline":
        lk_weights = replace(lk_weights, energy=0.0)
    lc_weights = LcWeights(**planner_cfg.get("lc_weights", {}))

    rng = np.random.default_rng(scenario.rng_seed)
    npcs = []
    for spawn in scenario.npc_spawns:
        st = spawn.state
        idm = _draw_idm(rng, road.legal_speed_at(st.s), spawn.behavior)
        npcs.append(
            NpcRuntime(s=st.s, v=st.v, lane=st.lane, e_y=st.e_y, length=st.length,
                       width=st.width, idm=idm)
        )

    ego = np.array(
        [scenario.ego_initial.s, scenario.ego_initial.v, scenario.ego_initial.e_y,
         scenario.ego_initial.e_psi]
    )
    ego_len = scenario.ego_initial.length

    plan: Optional[PlannedTrajectory] = None
    plan_off = 0
    in_lc = False
    lc_target_y = 0.0
    target_lane = road.lane_of_offset(ego[2])

    n_ticks = int(round(scenario.run_duration / DT))
    speeds = np.empty(n_ticks)
    energy_j = 0.0
    trace: list = []
    events: list = []
    lane_changes = 0
    min_front_gap: Optional[float] = None
    completed = False
    travel_time: Optional[float] = None
    ticks_done = 0
    decisions_str = ""

    for k in range(n_ticks):
        t = k * DT
        lane = road.lane_of_offset(ego[2])

        if k % PLAN_PERIOD_TICKS == 0:
            if in_lc and abs(ego[2] - lc_target_y) <= 0.1 + 1e-9:
                # latch release: snap onto the lane center and resume planning
                ego[2] = lc_target_y
                ego[3] = 0.0
                in_lc = False
                lane = road.lane_of_offset(ego[2])
                lane_changes += 1
                plan = None
                events.append({"t": t, "event": "lc_complete", "lane": lane})
            elif in_lc and plan_off >= plan.horizon:
                # defensive: plan exhausted without reaching the band
                ego[2] = lane_center_offset(road, road.lane_of_offset(ego[2]))
                ego[3] = 0.0
                in_lc = False
                lane = road.lane_of_offset(ego[2])
                plan = None
                events.append({"t": t, "event": "lc_abort", "lane": lane})

            if not in_lc:
                committed = None
                if plan is not None and plan_off < plan.horizon:
                    committed = float(plan.torque[plan_off])
                    # the simulator holds v at zero under a brake torque, but
                    # the planner model has no such clamp; pin only the part
                    # of the committed torque that is realizable from here
                    committed = max(committed, -ego[1] / (DT * vehicle.accel_gain))

                decision, light = _score_lane(scenario, npcs, t, ego[0], ego[1], lane)
                target_lane = lane
                if policy == "proposed":
                    per_lane = []
                    for l in range(road.lane_count):
                        d, _ = (decision, light) if l == lane else _score_lane(
                            scenario, npcs, t, ego[0], ego[1], l
                        )
                        per_lane.append(d)
                    target_lane = select_lane(per_lane, lane).target_lane
                    decisions_str = ";".join(
                        f"l{i}={d.value.value}@{_fmt_eta(d.eta)}"
                        for i, d in enumerate(per_lane)
                    )
                else:
                    decisions_str = f"l{lane}={decision.value.value}@{_fmt_eta(decision.eta)}"

                if target_lane != lane:
                    svs = [
                        SvPolytope(s=npc.s, v=npc.v, e_y=npc.e_y, length=npc.length, width=npc.width)
                        for npc in npcs
                        if abs(npc.s - ego[0]) <= SV_RELEVANCE_RANGE
                    ]
                    u_pin = None
                    if plan is not None and plan_off < plan.horizon and committed is not None:
                        u_pin = (committed, float(plan.kappa[plan_off]))
                    try:
                        plan = plan_lc(
                            ego, target_lane, road, svs, vehicle, energy_params,
                            lc_weights, u_pin=u_pin, t0=t,
                        )
                        plan_off = 0
                        in_lc = True
                        lc_target_y = lane_center_offset(road, target_lane)
                        events.append({"t": t, "event": "lc_start", "from": lane, "to": target_lane})
                    except LaneChangeInfeasible as exc:
                        events.append({"t": t, "event": "lc_infeasible", "reason": str(exc)})
                        target_lane = lane

                if not in_lc:
                    stop = _stop_required(scenario, decision, light, ego[0], ego[1], t)
                    stop_s = light.stop_line_s if (stop and light is not None) else None
                    v_ref = build_reference(road, ego[0], stop_s=stop_s)
                    fronts = []
                    front = _lane_front(npcs, ego[0], lane)
                    if front is not None:
                        # carry only braking into the prediction; assuming a
                        # speed-up would relax the headway rows unsafely
                        fronts.append(FrontPrediction(s=front.s - front.length / 2.0,
                                                      v=front.v, accel=min(front.accel, 0.0)))
                    if stop_s is not None:
                        fronts.append(FrontPrediction(s=stop_s, v=0.0))
                    plan = plan_lk(
                        ego[0], ego[1], v_ref, fronts, vehicle, energy_params, lk_weights,
                        u_pin=committed, e_y=ego[2],
                        kappa_road=road.curvature_at(ego[0]), t0=t,
                    )
                    plan_off = 0
                    if plan.kind == "emergency":
                        events.append({"t": t, "event": "emergency_brake"})

        # --- record, then advance one tick ---------------------------------
        torque = float(plan.torque[plan_off])
        kappa = float(plan.kappa[plan_off])
        speeds[k] = ego[1]
        power = clamped_stage_cost(energy_params, torque, ego[1])
        energy_j += power * DT

        front = _lane_front(npcs, ego[0], lane)
        front_gap = None
        if front is not None:
            front_gap = (front.s - front.length / 2.0) - (ego[0] + ego_len / 2.0)
            min_front_gap = front_gap if min_front_gap is None else min(min_front_gap, front_gap)

        if collect_trace:
            light = _next_light(scenario, ego[0], lane)
            phase = spat_at(light, t).phase.value if light is not None else "NONE"
            trace.append(
                {
                    "t": round(t, 4),
                    "s": float(ego[0]),
                    "v": float(ego[1]),
                    "e_y": float(ego[2]),
                    "e_psi": float(ego[3]),
                    "lane": lane,
                    "target_lane": target_lane,
                    "torque": torque,
                    "kappa": kappa,
                    "power": power,
                    "phase": phase,
                    "decisions": decisions_str,
                    "in_lc": in_lc,
                    "front_gap": front_gap,
                }
            )

        ego_pre = ego.copy()
        ego = plan.state(plan_off + 1)
        plan_off += 1

        # NPCs step simultaneously from the pre-tick snapshot
        ego_lane_now = road.lane_of_offset(ego_pre[2])
        accels = []
        for npc in npcs:
            leaders: list[tuple[float, float]] = []
            lead = _lane_front(npcs, npc.s, npc.lane)
            if lead is not None:
                leaders.append((lead.s - lead.length / 2.0 - (npc.s + npc.length / 2.0), lead.v))
            if ego_lane_now == npc.lane and ego_pre[0] > npc.s:
                leaders.append((ego_pre[0] - ego_len / 2.0 - (npc.s + npc.length / 2.0), ego_pre[1]))
            light = _next_light(scenario, npc.s, npc.lane)
            if light is not None and spat_at(light, t).phase is not Phase.GREEN:
                leaders.append((light.stop_line_s - (npc.s + npc.length / 2.0), 0.0))
            accels.append((npc, leaders))
        for npc, leaders in accels:
            step_npc(npc, leaders)

        ticks_done = k + 1
        if ego[0] >= road.route_length:
            completed = True
            travel_time = ticks_done * DT
            break

    speeds = speeds[:ticks_done]
    sim_time = ticks_done * DT
    distance = float(ego[0] - scenario.ego_initial.s)
    total_mpge = mpge(energy_j, distance) if energy_j > 0 and distance > 0 else None
    metrics = RunMetrics(
        policy=policy,
        seed=scenario.rng_seed,
        completed=completed,
        sim_time=sim_time,
        travel_time=travel_time,
        distance_m=distance,
        energy_j=energy_j,
        mpge=total_mpge,
        stops=count_stops(speeds),
        lane_changes=lane_changes,
        avg_speed_mps=float(speeds.mean()) if speeds.size else 0.0,
        min_front_gap=min_front_gap,
    )
    return RunResult(metrics=metrics, trace=trace, events=events)
