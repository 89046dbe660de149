"""SPaT-based lane scoring and target-lane selection.

For each lane the selector predicts the ego's arrival time at the next stop
line under a constant-speed model (two phases when a slower preceding vehicle
is caught first), classifies the lane PASS or NONPASS against that light's
phase countdown, and picks the target lane:

- exactly one PASS lane: take it,
- every lane NONPASS: keep the current lane,
- several PASS lanes: smallest arrival time, ties favoring the current lane.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from ecolane.world import Phase, SpatSnapshot

INFINITE_ETA = math.inf


class PassValue(enum.Enum):
    PASS = "PASS"
    NONPASS = "NONPASS"


@dataclass(frozen=True)
class PassDecision:
    """Classification of one lane: can the ego clear its light without stopping."""

    value: PassValue
    eta: float
    phase: Phase
    remaining_time: float


@dataclass(frozen=True)
class LaneDecision:
    target_lane: int
    change_requested: bool
    per_lane: tuple[PassDecision, ...]

    @property
    def any_pass(self) -> bool:
        return any(d.value is PassValue.PASS for d in self.per_lane)


def eta_to_light(
    ego_s: float,
    ego_v: float,
    stop_line_s: float,
    front_s: Optional[float] = None,
    front_v: Optional[float] = None,
) -> float:
    """Constant-speed arrival time at the stop line, INFINITE_ETA if never.

    With a slower preceding vehicle the ego closes the gap at (v - v_front),
    then follows at the front's speed; a front that is stopped, or an ego at
    rest, yields INFINITE_ETA when the stop line cannot be reached.
    """
    if ego_s >= stop_line_s:
        return 0.0
    free = INFINITE_ETA if ego_v <= 0.0 else (stop_line_s - ego_s) / ego_v
    if front_s is None or front_v is None:
        return free
    if front_s <= ego_s or ego_v <= front_v:
        return free
    t_catch = (front_s - ego_s) / (ego_v - front_v)
    if ego_s + ego_v * t_catch >= stop_line_s:
        return free
    if front_v <= 0.0:
        return INFINITE_ETA
    t_follow = ((stop_line_s - ego_s) * (ego_v - front_v) - ego_v * (front_s - ego_s)) / (
        (ego_v - front_v) * front_v
    )
    return t_catch + t_follow


def pass_decision(spat: SpatSnapshot, eta: float) -> PassDecision:
    """Classify one lane from its light's phase countdown and the arrival time."""
    phase, remaining = spat.phase, spat.remaining_time
    if eta == INFINITE_ETA or phase is Phase.YELLOW:
        value = PassValue.NONPASS
    elif phase is Phase.GREEN:
        value = PassValue.PASS if remaining > eta else PassValue.NONPASS
    else:  # RED: passable only if it turns green before arrival
        value = PassValue.NONPASS if remaining > eta else PassValue.PASS
    return PassDecision(value=value, eta=eta, phase=phase, remaining_time=remaining)


def select_lane(per_lane: Sequence[PassDecision], current_lane: int) -> LaneDecision:
    """Apply the target-lane rule to per-lane PASS/NONPASS classifications."""
    if not 0 <= current_lane < len(per_lane):
        raise ValueError(f"current_lane {current_lane} outside the {len(per_lane)} scored lanes")
    passing = [i for i, d in enumerate(per_lane) if d.value is PassValue.PASS]
    if not passing:
        target = current_lane
    elif len(passing) == 1:
        target = passing[0]
    else:
        best_eta = min(per_lane[i].eta for i in passing)
        best = [i for i in passing if per_lane[i].eta == best_eta]
        target = current_lane if current_lane in best else best[0]
    return LaneDecision(
        target_lane=target,
        change_requested=target != current_lane,
        per_lane=tuple(per_lane),
    )
