"""Planned trajectory container shared by the planners and the harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ecolane.dynamics import ControlInput, VehicleParams, step_euler_raw


@dataclass(frozen=True, eq=False)
class PlannedTrajectory:
    """A horizon of states sampled at fixed dt plus the inputs between them.

    State arrays have length N+1, input arrays length N. ``kappa_road`` holds
    the road curvature each input interval was planned against, so dynamic
    consistency can be re-checked without the road object. ``kind`` is one of
    "lk", "lc", "emergency"; ``status`` echoes the solver outcome.
    """

    t: np.ndarray
    s: np.ndarray
    v: np.ndarray
    e_y: np.ndarray
    e_psi: np.ndarray
    torque: np.ndarray
    kappa: np.ndarray
    kappa_road: np.ndarray
    kind: str
    status: str = "Optimal"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.torque.shape[0]
        for name in ("t", "s", "v", "e_y", "e_psi"):
            if getattr(self, name).shape != (n + 1,):
                raise ValueError(f"{name} must have length {n + 1}")
        for name in ("kappa", "kappa_road"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} must have length {n}")

    @property
    def horizon(self) -> int:
        return self.torque.shape[0]

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def accel(self, params: VehicleParams) -> np.ndarray:
        """Longitudinal acceleration per input interval [m/s^2]."""
        return self.torque * params.accel_gain

    def state(self, i: int) -> np.ndarray:
        return np.array([self.s[i], self.v[i], self.e_y[i], self.e_psi[i]])

    def dynamics_residual(self, params: VehicleParams) -> float:
        """Max-norm defect of the unclamped forward-Euler model over the horizon."""
        worst = 0.0
        for i in range(self.horizon):
            nxt = step_euler_raw(
                self.state(i),
                ControlInput(torque=float(self.torque[i]), kappa=float(self.kappa[i])),
                float(self.kappa_road[i]),
                params,
                self.dt,
            )
            worst = max(worst, float(np.abs(nxt - self.state(i + 1)).max()))
        return worst

    @classmethod
    def from_longitudinal(
        cls,
        t0: float,
        s: np.ndarray,
        v: np.ndarray,
        torque: np.ndarray,
        e_y: float,
        kappa_road: np.ndarray,
        dt: float,
        kind: str,
        status: str = "Optimal",
        meta: dict | None = None,
    ) -> "PlannedTrajectory":
        """Wrap a lane-keeping (purely longitudinal) solution.

        Lateral offset stays fixed and the curvature input tracks the road, so
        the heading error remains zero along the horizon.
        """
        n = torque.shape[0]
        return cls(
            t=t0 + dt * np.arange(n + 1),
            s=np.asarray(s, dtype=float),
            v=np.asarray(v, dtype=float),
            e_y=np.full(n + 1, float(e_y)),
            e_psi=np.zeros(n + 1),
            torque=np.asarray(torque, dtype=float),
            kappa=np.asarray(kappa_road, dtype=float).copy(),
            kappa_road=np.asarray(kappa_road, dtype=float),
            kind=kind,
            status=status,
            meta=meta or {},
        )
