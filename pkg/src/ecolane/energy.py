"""Wheel-power energy model, identification, and trip metering.

Instantaneous electrical power is modeled affinely in speed with a
torque-speed cross term:

    P(torque, v) = c1 * torque * v + c2 * v      [W]

``c1`` (dimensionless) scales mechanical wheel power torque*v/r_eff folded
into one coefficient; ``c2`` [W*s/m] absorbs speed-proportional draw. Both
are constrained non-negative. The stage cost used by the planners is the
clamp max(P, 0): regeneration is treated as free rather than credited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# defaults identified from drive-cycle data
C1_DEFAULT = 4.47
C2_DEFAULT = 1522.23

KWH_PER_GALLON = 33.7
METERS_PER_MILE = 1609.34


@dataclass(frozen=True)
class EnergyModelParams:
    c1: float = C1_DEFAULT
    c2: float = C2_DEFAULT

    def __post_init__(self):
        if self.c1 < 0 or self.c2 < 0:
            raise ValueError("energy coefficients must be >= 0")


@dataclass(frozen=True)
class PowerSample:
    """One (torque, speed, measured power) row for model identification."""

    torque: float
    speed: float
    power: float


def stage_cost(params: EnergyModelParams, torque: float, v: float) -> float:
    """Modeled instantaneous power c1*torque*v + c2*v [W]. May be negative."""
    return params.c1 * torque * v + params.c2 * v


def clamped_stage_cost(params: EnergyModelParams, torque: float, v: float) -> float:
    """max(stage_cost, 0): the energy rate actually metered and planned for."""
    return max(stage_cost(params, torque, v), 0.0)


def _sse(a: np.ndarray, b: np.ndarray, y: np.ndarray, c1: float, c2: float) -> float:
    r = c1 * a + c2 * b - y
    return float(r @ r)


def fit_params(samples: Sequence[PowerSample]) -> EnergyModelParams:
    """Least-squares fit of (c1, c2) with both coefficients kept non-negative.

    Two variables admit an exact active-set enumeration: solve the
    unconstrained normal equations, and if that violates a sign constraint
    fall back to the best among the single-coefficient fits and (0, 0).
    Raises ValueError when the regressors cannot identify the model
    (all-zero speed, or torque*v collinear with v).
    """
    if len(samples) < 2:
        raise ValueError("need at least 2 samples to fit 2 coefficients")
    a = np.array([s.torque * s.speed for s in samples])  # regressor of c1
    b = np.array([s.speed for s in samples])  # regressor of c2
    y = np.array([s.power for s in samples])

    saa, sab, sbb = float(a @ a), float(a @ b), float(b @ b)
    say, sby = float(a @ y), float(b @ y)
    if sbb == 0.0:
        raise ValueError("degenerate fit: all samples have zero speed")
    det = saa * sbb - sab * sab
    if det <= 1e-12 * saa * sbb or saa == 0.0:
        raise ValueError("degenerate fit: torque*speed regressor is collinear with speed")

    # interior candidate
    c1 = (say * sbb - sby * sab) / det
    c2 = (sby * saa - say * sab) / det
    if c1 >= 0.0 and c2 >= 0.0:
        return EnergyModelParams(c1=c1, c2=c2)

    # boundary candidates; each single-variable solution clamps at zero
    candidates = [
        (max(say / saa, 0.0), 0.0),
        (0.0, max(sby / sbb, 0.0)),
        (0.0, 0.0),
    ]
    best = min(candidates, key=lambda c: _sse(a, b, y, *c))
    return EnergyModelParams(c1=best[0], c2=best[1])


def meter_trajectory(
    params: EnergyModelParams, torques: np.ndarray, speeds: np.ndarray, dt: float = 0.1
) -> float:
    """Total metered energy [J] over executed (torque, speed) ticks."""
    torques = np.asarray(torques, dtype=float)
    speeds = np.asarray(speeds, dtype=float)
    if torques.shape != speeds.shape:
        raise ValueError("torques and speeds must have the same length")
    power = params.c1 * torques * speeds + params.c2 * speeds
    return float(np.maximum(power, 0.0).sum() * dt)


def mpge(energy_j: float, distance_m: float) -> float:
    """Miles per gallon-of-gasoline-equivalent at 33.7 kWh per gallon."""
    if energy_j <= 0 or distance_m <= 0:
        raise ValueError("energy and distance must be > 0")
    miles = distance_m / METERS_PER_MILE
    gallons = energy_j / 3.6e6 / KWH_PER_GALLON
    return miles / gallons
