"""Point-mass vehicle model in the Frenet frame.

State x = [s, v, e_y, e_psi]:

- s      arc position along the reference centerline [m]
- v      longitudinal speed [m/s]
- e_y    lateral offset from the centerline [m]
- e_psi  heading error relative to the centerline tangent [rad]

Input u = [torque, kappa]: total wheel torque [N*m] and path curvature [1/m].
Continuous model:

    s'     = v * cos(e_psi)
    v'     = torque / (mass * r_eff)
    e_y'   = v * sin(e_psi)
    e_psi' = (kappa - kappa_road) * v * cos(e_psi)

Discretization is forward Euler. ``step_discrete`` (simulation) clamps speed
at zero; ``step_euler_raw`` (used inside the optimal-control transcriptions)
does not, so planner constraints stay smooth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DT = 0.1  # planner and simulator step [s]


@dataclass(frozen=True)
class VehicleParams:
    """Ego platform constants. Torque bounds are total at the wheel."""

    mass: float = 1700.0
    r_eff: float = 0.31
    torque_max: float = 1054.0
    torque_min: float = -2108.0
    v_max: float = 13.4
    length: float = 5.0
    width: float = 2.0

    def __post_init__(self):
        if self.mass <= 0 or self.r_eff <= 0:
            raise ValueError("mass and r_eff must be > 0")
        if self.torque_max <= 0 or self.torque_min >= 0:
            raise ValueError("torque_max must be > 0 and torque_min < 0")
        if self.v_max <= 0:
            raise ValueError("v_max must be > 0")

    @property
    def accel_gain(self) -> float:
        """dv/dt per unit torque: 1 / (mass * r_eff)."""
        return 1.0 / (self.mass * self.r_eff)


@dataclass(frozen=True)
class ControlInput:
    torque: float
    kappa: float = 0.0


def continuous_derivative(
    state: np.ndarray, control: ControlInput, kappa_road: float, params: VehicleParams
) -> np.ndarray:
    """Time derivative of [s, v, e_y, e_psi] under the point-mass model."""
    _, v, _, e_psi = state
    cos_epsi = np.cos(e_psi)
    return np.array(
        [
            v * cos_epsi,
            control.torque * params.accel_gain,
            v * np.sin(e_psi),
            (control.kappa - kappa_road) * v * cos_epsi,
        ]
    )


def step_euler_raw(
    state: np.ndarray, control: ControlInput, kappa_road: float, params: VehicleParams, dt: float = DT
) -> np.ndarray:
    """One forward-Euler step with no state clamping (planner-side model)."""
    return np.asarray(state, dtype=float) + dt * continuous_derivative(state, control, kappa_road, params)


def step_discrete(
    state: np.ndarray, control: ControlInput, kappa_road: float, params: VehicleParams, dt: float = DT
) -> np.ndarray:
    """One forward-Euler step with speed clamped at zero (simulator-side)."""
    nxt = step_euler_raw(state, control, kappa_road, params, dt)
    if nxt[1] < 0.0:
        nxt[1] = 0.0
    return nxt


def lk_matrices(params: VehicleParams, dt: float = DT) -> tuple[np.ndarray, np.ndarray]:
    """Discrete (A, B) of the straight-lane longitudinal model.

    State [s, v], input torque:  x+ = A x + B u  with  A = [[1, dt], [0, 1]],
    B = [0, dt / (mass * r_eff)].
    """
    a = np.array([[1.0, dt], [0.0, 1.0]])
    b = np.array([[0.0], [dt * params.accel_gain]])
    return a, b
