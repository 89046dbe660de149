"""Road geometry, traffic-light schedules, agents, and scenario configuration.

Everything lives in the Frenet frame of the reference centerline (the center
of lane 0): ``s`` is distance traveled along the centerline in meters, ``e_y``
the lateral offset in meters (positive toward higher lane indices), ``e_psi``
the heading error in radians. All types are immutable value objects.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence


class Phase(enum.Enum):
    GREEN = "GREEN"
    YELLOW = "YELLOW"
    RED = "RED"


class ScenarioError(ValueError):
    """Raised when a scenario file violates the schema. Carries the offending field."""

    def __init__(self, field_name: str, reason: str):
        self.field = field_name
        self.reason = reason
        super().__init__(f"{field_name}: {reason}")


def _piecewise_value(table: Sequence[tuple[float, float]], s: float) -> float:
    """Evaluate a piecewise-constant table of (s_start, value) rows at s."""
    value = table[0][1]
    for s_start, v in table:
        if s >= s_start:
            value = v
        else:
            break
    return value


@dataclass(frozen=True)
class RoadNetwork:
    """A one-way road with parallel lanes sharing one reference centerline.

    ``curvature`` and ``legal_speed`` are piecewise-constant tables of
    (s_start, value) rows sorted by s_start; the first row must start at 0.
    Lane 0 hosts the reference centerline, so lane lateral offsets are
    ``i * lane_width``.
    """

    lane_count: int = 2
    lane_width: float = 3.5
    route_length: float = 600.0
    curvature: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    legal_speed: tuple[tuple[float, float], ...] = ((0.0, 13.4),)

    def __post_init__(self):
        if self.lane_count < 2:
            raise ScenarioError("road.lane_count", "must be >= 2")
        if self.lane_width <= 0:
            raise ScenarioError("road.lane_width", "must be > 0")
        if self.route_length <= 0:
            raise ScenarioError("road.route_length", "must be > 0")
        for tbl, name in ((self.curvature, "curvature"), (self.legal_speed, "legal_speed")):
            if not tbl or tbl[0][0] != 0.0:
                raise ScenarioError(f"road.{name}", "first breakpoint must be at s=0")
            starts = [row[0] for row in tbl]
            if starts != sorted(starts):
                raise ScenarioError(f"road.{name}", "breakpoints must be sorted by s")
        if any(abs(k) > 0.1 for _, k in self.curvature):
            raise ScenarioError("road.curvature", "|curvature| must be <= 0.1 1/m")
        if any(v <= 0 for _, v in self.legal_speed):
            raise ScenarioError("road.legal_speed", "speeds must be > 0")

    @property
    def lane_lateral_offsets(self) -> tuple[float, ...]:
        return tuple(i * self.lane_width for i in range(self.lane_count))

    def curvature_at(self, s: float) -> float:
        return _piecewise_value(self.curvature, s)

    def legal_speed_at(self, s: float) -> float:
        return _piecewise_value(self.legal_speed, s)

    def lane_of_offset(self, e_y: float) -> int:
        """Lane membership by nearest lane-center offset."""
        offsets = self.lane_lateral_offsets
        return min(range(self.lane_count), key=lambda i: abs(offsets[i] - e_y))


@dataclass(frozen=True)
class TrafficLightSchedule:
    """Deterministic cyclic light: GREEN -> YELLOW -> RED, repeating.

    ``cycle_offset`` shifts the timeline: a cycle (GREEN onset) starts at every
    t = cycle_offset + n * period.
    """

    stop_line_s: float
    green: float
    yellow: float
    red: float
    cycle_offset: float = 0.0
    applies_to_lanes: tuple[int, ...] = (0, 1)

    def __post_init__(self):
        for name in ("green", "yellow", "red"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"light.{name}", "phase duration must be > 0")
        if self.stop_line_s <= 0:
            raise ScenarioError("light.stop_line_s", "must be > 0")

    @property
    def period(self) -> float:
        return self.green + self.yellow + self.red


@dataclass(frozen=True)
class SpatSnapshot:
    """Phase, remaining time, and stop-line position of one light for one lane."""

    phase: Phase
    remaining_time: float
    stop_line_s: float


@dataclass(frozen=True)
class AgentState:
    """Frenet-frame kinematic state of a vehicle (ego or surrounding)."""

    s: float
    v: float
    e_y: float = 0.0
    e_psi: float = 0.0
    lane: int = 0
    length: float = 5.0
    width: float = 2.0

    def __post_init__(self):
        if self.v < 0:
            raise ScenarioError("agent.v", "speed must be >= 0")
        if self.length <= 0 or self.width <= 0:
            raise ScenarioError("agent.length/width", "dimensions must be > 0")


def spat_at(schedule: TrafficLightSchedule, t: float) -> SpatSnapshot:
    """SPaT snapshot of a cyclic schedule at wall time t (total, periodic)."""
    tau = (t - schedule.cycle_offset) % schedule.period
    if tau < schedule.green:
        return SpatSnapshot(Phase.GREEN, schedule.green - tau, schedule.stop_line_s)
    if tau < schedule.green + schedule.yellow:
        return SpatSnapshot(Phase.YELLOW, schedule.green + schedule.yellow - tau, schedule.stop_line_s)
    return SpatSnapshot(Phase.RED, schedule.period - tau, schedule.stop_line_s)


def lane_center_offset(road: RoadNetwork, lane: int) -> float:
    """Lateral offset of a lane center relative to the reference centerline."""
    if not 0 <= lane < road.lane_count:
        raise ValueError(f"lane index {lane} out of range [0, {road.lane_count})")
    return road.lane_lateral_offsets[lane]


def preceding_vehicle(agents: Sequence[AgentState], ego_s: float, lane: int) -> Optional[AgentState]:
    """The agent in `lane` with minimal s strictly ahead of ego_s, or None."""
    best: Optional[AgentState] = None
    for agent in agents:
        if agent.lane == lane and agent.s > ego_s:
            if best is None or agent.s < best.s:
                best = agent
    return best


@dataclass(frozen=True)
class NpcSpawn:
    """Initial state of one scripted surrounding vehicle plus behavior overrides.

    ``behavior`` may pin any subset of the car-following parameters
    (desired_speed, accel_max, decel_comfort, headway_time, min_gap);
    unpinned ones are drawn from the scenario RNG at spawn.
    """

    state: AgentState
    behavior: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one reproducible closed-loop run."""

    road: RoadNetwork
    lights: tuple[TrafficLightSchedule, ...]
    ego_initial: AgentState
    npc_spawns: tuple[NpcSpawn, ...] = ()
    rng_seed: int = 0
    run_duration: float = 120.0
    planner: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.run_duration <= 0:
            raise ScenarioError("run_duration", "must be > 0")
        agents = [self.ego_initial] + [n.state for n in self.npc_spawns]
        for idx, a in enumerate(agents):
            name = "ego" if idx == 0 else f"npcs[{idx - 1}]"
            if not 0 <= a.lane < self.road.lane_count:
                raise ScenarioError(f"{name}.lane", "outside road lanes")
            if not 0 <= a.s <= self.road.route_length:
                raise ScenarioError(f"{name}.s", "outside route bounds")
        for i in range(len(agents)):
            for j in range(i + 1, len(agents)):
                a, b = agents[i], agents[j]
                if a.lane == b.lane and abs(a.s - b.s) < (a.length + b.length) / 2:
                    raise ScenarioError("npcs", f"agents {i} and {j} overlap at t=0")


# ---------------------------------------------------------------------------
# JSON scenario files

SCHEMA_VERSION = 1


def _require(obj: dict, key: str, ctx: str):
    if key not in obj:
        raise ScenarioError(f"{ctx}.{key}" if ctx else key, "missing required field")
    return obj[key]


def _as_table(value, ctx: str) -> tuple[tuple[float, float], ...]:
    if isinstance(value, (int, float)):
        return ((0.0, float(value)),)
    try:
        return tuple((float(a), float(b)) for a, b in value)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(ctx, "must be a number or a list of [s, value] pairs") from exc


def _agent_from_dict(obj: dict, ctx: str, road: RoadNetwork) -> AgentState:
    lane = int(_require(obj, "lane", ctx))
    e_y = obj.get("e_y")
    if e_y is None:
        if not 0 <= lane < road.lane_count:
            raise ScenarioError(f"{ctx}.lane", "outside road lanes")
        e_y = road.lane_lateral_offsets[lane]
    return AgentState(
        s=float(_require(obj, "s", ctx)),
        v=float(_require(obj, "v", ctx)),
        e_y=float(e_y),
        e_psi=float(obj.get("e_psi", 0.0)),
        lane=lane,
        length=float(obj.get("length", 5.0)),
        width=float(obj.get("width", 2.0)),
    )


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from parsed JSON."""
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "scenario must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"unsupported version {version} (expected {SCHEMA_VERSION})")

    road_obj = _require(data, "road", "")
    road = RoadNetwork(
        lane_count=int(road_obj.get("lane_count", 2)),
        lane_width=float(_require(road_obj, "lane_width", "road")),
        route_length=float(_require(road_obj, "route_length", "road")),
        curvature=_as_table(road_obj.get("curvature", 0.0), "road.curvature"),
        legal_speed=_as_table(_require(road_obj, "legal_speed", "road"), "road.legal_speed"),
    )

    lights = []
    for i, lobj in enumerate(data.get("lights", [])):
        ctx = f"lights[{i}]"
        lights.append(
            TrafficLightSchedule(
                stop_line_s=float(_require(lobj, "stop_line_s", ctx)),
                green=float(_require(lobj, "green", ctx)),
                yellow=float(_require(lobj, "yellow", ctx)),
                red=float(_require(lobj, "red", ctx)),
                cycle_offset=float(lobj.get("cycle_offset", 0.0)),
                applies_to_lanes=tuple(lobj.get("lanes", range(road.lane_count))),
            )
        )

    ego = _agent_from_dict(_require(data, "ego", ""), "ego", road)
    npcs = []
    for i, nobj in enumerate(data.get("npcs", [])):
        ctx = f"npcs[{i}]"
        npcs.append(NpcSpawn(state=_agent_from_dict(nobj, ctx, road), behavior=dict(nobj.get("behavior", {}))))

    return ScenarioConfig(
        road=road,
        lights=tuple(lights),
        ego_initial=ego,
        npc_spawns=tuple(npcs),
        rng_seed=int(data.get("rng_seed", 0)),
        run_duration=float(data.get("run_duration", 120.0)),
        planner=dict(data.get("planner", {})),
    )


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("<file>", f"not valid JSON: {exc}") from exc
    return scenario_from_dict(data)


def scenario_hash(path: str) -> str:
    """Stable content hash of a scenario file, embedded in outputs for provenance."""
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]
