"""Energy-efficient lane selection and trajectory planning for a two-lane urban road.

The package provides:

- a world model (road geometry, deterministic traffic lights, agents),
- a point-mass vehicle model in the Frenet frame of the reference centerline,
- a wheel-power energy model with constrained least-squares identification,
- a SPaT-based lane selector (PASS/NONPASS per lane, target-lane rule),
- optimization-based lane-keeping and lane-change trajectory planners built
  on a small SQP solver,
- a deterministic closed-loop simulation harness and a CLI for runs,
  A/B comparisons, energy-model fitting, and plot-data export.
"""

from ecolane.world import (
    AgentState,
    NpcSpawn,
    Phase,
    RoadNetwork,
    ScenarioConfig,
    ScenarioError,
    SpatSnapshot,
    TrafficLightSchedule,
    lane_center_offset,
    load_scenario,
    preceding_vehicle,
    spat_at,
)
from ecolane.dynamics import ControlInput, VehicleParams, continuous_derivative, lk_matrices, step_discrete
from ecolane.energy import EnergyModelParams, PowerSample, clamped_stage_cost, fit_params, meter_trajectory, mpge, stage_cost
from ecolane.selector import INFINITE_ETA, LaneDecision, PassDecision, PassValue, eta_to_light, pass_decision, select_lane
from ecolane.trajectory import PlannedTrajectory
from ecolane.nlp import NlpProblem, NlpSolution, NlpStatus, SqpOptions, solve, verify_kkt_fd
from ecolane.planner_lk import FrontPrediction, LkWeights, build_reference, plan_lk
from ecolane.planner_lc import (
    FreeSpaceGap,
    LaneChangeInfeasible,
    LcBounds,
    LcWeights,
    SvPolytope,
    enlarge_sv,
    enumerate_gaps,
    plan_lc,
    rect_distance,
    select_free_space,
    verify_clearance,
)
from ecolane.harness import RunMetrics, RunResult, count_stops, run

__all__ = [
    "AgentState",
    "ControlInput",
    "EnergyModelParams",
    "FreeSpaceGap",
    "FrontPrediction",
    "INFINITE_ETA",
    "LaneChangeInfeasible",
    "LaneDecision",
    "LcBounds",
    "LcWeights",
    "LkWeights",
    "NlpProblem",
    "NlpSolution",
    "NlpStatus",
    "NpcSpawn",
    "PassDecision",
    "PassValue",
    "Phase",
    "PlannedTrajectory",
    "PowerSample",
    "RoadNetwork",
    "RunMetrics",
    "RunResult",
    "ScenarioConfig",
    "ScenarioError",
    "SpatSnapshot",
    "SqpOptions",
    "SvPolytope",
    "TrafficLightSchedule",
    "VehicleParams",
    "build_reference",
    "clamped_stage_cost",
    "continuous_derivative",
    "count_stops",
    "enlarge_sv",
    "enumerate_gaps",
    "eta_to_light",
    "fit_params",
    "lane_center_offset",
    "lk_matrices",
    "load_scenario",
    "meter_trajectory",
    "mpge",
    "pass_decision",
    "plan_lc",
    "plan_lk",
    "preceding_vehicle",
    "rect_distance",
    "run",
    "select_free_space",
    "select_lane",
    "solve",
    "spat_at",
    "stage_cost",
    "step_discrete",
    "verify_clearance",
    "verify_kkt_fd",
]

__version__ = "0.1.0"
