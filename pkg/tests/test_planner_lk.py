import numpy as np
import pytest

from ecolane.dynamics import VehicleParams
from ecolane.energy import EnergyModelParams, meter_trajectory
from ecolane.planner_lk import (
    D_SAFE,
    DT,
    HORIZON,
    FrontPrediction,
    LkWeights,
    build_reference,
    plan_lk,
)
from ecolane.world import RoadNetwork

VEH = VehicleParams()
ROAD = RoadNetwork()


def check_hard_constraints(traj, fronts=(), d_safe=D_SAFE, t_gap=1.0, tol=1e-6):
    """Speed band, torque box, and headway at every step of the horizon."""
    assert np.all(traj.v >= -tol)
    assert np.all(traj.v <= VEH.v_max + tol)
    assert np.all(traj.torque >= VEH.torque_min - tol)
    assert np.all(traj.torque <= VEH.torque_max + tol)
    for f in fronts:
        f_pos, f_spd = f.rollout(traj.horizon, traj.dt)
        gap_needed = d_safe + (traj.v - f_spd) * t_gap
        assert np.all(f_pos - traj.s >= gap_needed - tol)


class TestFrontPrediction:
    def test_constant_speed_rollout(self):
        f = FrontPrediction(s=40.0, v=6.0)
        pos, spd = f.rollout(5, 0.1)
        assert np.allclose(pos, 40.0 + 0.6 * np.arange(6))
        assert np.all(spd == 6.0)

    def test_braking_rollout_stops_at_zero(self):
        f = FrontPrediction(s=0.0, v=1.0, accel=-2.0)
        pos, spd = f.rollout(10, 0.1)
        assert np.all(spd >= 0.0)
        assert spd[-1] == 0.0
        assert np.all(np.diff(pos) >= 0.0)
        # once stopped the position freezes
        assert pos[-1] == pos[-2]

    def test_zero_accel_equals_constant_speed(self):
        a = FrontPrediction(s=10.0, v=7.0, accel=0.0).rollout(50, 0.1)
        b = FrontPrediction(s=10.0, v=7.0).rollout(50, 0.1)
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


class TestBuildReference:
    def test_open_road_is_legal_speed(self):
        ref = build_reference(ROAD, s0=0.0)
        assert ref.shape == (HORIZON + 1,)
        assert np.all(ref == 13.4)

    def test_speed_zone_change_tracked(self):
        road = RoadNetwork(legal_speed=((0.0, 13.4), (30.0, 8.0)))
        ref = build_reference(road, s0=0.0)
        assert ref[0] == 13.4
        assert ref[-1] == 8.0

    def test_stop_ramp_reaches_zero_before_line(self):
        ref = build_reference(ROAD, s0=0.0, stop_s=30.0)
        assert ref[0] < 13.4  # already braking
        assert ref[-1] == 0.0
        assert np.all(np.diff(ref) <= 1e-12)

    def test_distant_stop_does_not_bite(self):
        ref = build_reference(ROAD, s0=0.0, stop_s=5000.0)
        assert np.all(ref == 13.4)


class TestPlanLk:
    def test_cruise_at_reference_is_zero_torque(self):
        v_ref = np.full(HORIZON + 1, 10.0)
        traj = plan_lk(0.0, 10.0, v_ref, weights=LkWeights(energy=0.0), u_pin=0.0)
        assert traj.kind == "lk"
        assert np.allclose(traj.torque, 0.0, atol=1e-6)
        assert np.allclose(traj.v, 10.0, atol=1e-6)
        assert np.allclose(traj.s, 0.0 + np.arange(HORIZON + 1), atol=1e-5)

    def test_standstill_with_zero_reference(self):
        v_ref = np.zeros(HORIZON + 1)
        traj = plan_lk(0.0, 0.0, v_ref, weights=LkWeights(energy=0.0))
        # torque tolerance is u-space tolerance divided by beta ~ 2e-4
        assert np.allclose(traj.torque, 0.0, atol=1e-2)
        assert np.allclose(traj.v, 0.0, atol=1e-4)
        assert np.allclose(traj.s, 0.0, atol=1e-4)

    def test_stopped_front_keeps_terminal_gap(self):
        front = FrontPrediction(s=60.0, v=0.0)
        v_ref = np.full(HORIZON + 1, 13.4)
        traj = plan_lk(0.0, 10.0, v_ref, fronts=front)
        assert traj.kind == "lk"
        check_hard_constraints(traj, [front])
        assert 60.0 - traj.s[-1] >= D_SAFE - 1e-6

    def test_hard_constraints_on_random_instances(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            v0 = float(rng.uniform(0.0, 13.4))
            s0 = float(rng.uniform(0.0, 100.0))
            v_ref = np.full(HORIZON + 1, float(rng.uniform(3.0, 13.4)))
            fronts = []
            if rng.random() < 0.7:
                gap0 = float(rng.uniform(D_SAFE + max(v0 - 5.0, 0.0) + 1.0, 120.0))
                fronts = [FrontPrediction(s=s0 + gap0, v=float(rng.uniform(0.0, 12.0)))]
            traj = plan_lk(s0, v0, v_ref, fronts=fronts)
            assert traj.kind == "lk"
            check_hard_constraints(traj, fronts)
            assert traj.dynamics_residual(VEH) <= 1e-8

    def test_u_pin_is_exact(self):
        v_ref = np.full(HORIZON + 1, 12.0)
        traj = plan_lk(0.0, 9.0, v_ref, u_pin=321.5)
        assert traj.torque[0] == pytest.approx(321.5, abs=1e-9)

    def test_u_pin_clipped_to_torque_box(self):
        v_ref = np.full(HORIZON + 1, 12.0)
        traj = plan_lk(0.0, 9.0, v_ref, u_pin=1e6)
        assert traj.torque[0] == pytest.approx(VEH.torque_max, rel=1e-12)

    def test_initial_headway_violation_uses_slack(self):
        # front only 4 m ahead: row 0 cannot be satisfied, slack absorbs it
        front = FrontPrediction(s=4.0, v=3.0)
        v_ref = np.full(HORIZON + 1, 13.4)
        traj = plan_lk(0.0, 10.0, v_ref, fronts=front)
        assert traj.kind == "lk"
        assert traj.meta["headway_slack"] > 0.0
        # strong braking response right away
        assert traj.torque[0] < 0.0
        assert traj.v[10] < 10.0

    def test_emergency_profile_when_infeasible(self):
        # starting far above v_max makes the speed band unreachable in one step
        v_ref = np.full(HORIZON + 1, 13.4)
        traj = plan_lk(0.0, VEH.v_max + 20.0, v_ref)
        assert traj.kind == "emergency"
        assert traj.status == "Emergency"
        assert traj.torque[0] == VEH.torque_min
        assert np.all(traj.v >= 0.0)
        assert np.all(np.diff(traj.v) <= 1e-12)

    def test_planned_energy_matches_metering(self):
        v_ref = np.full(HORIZON + 1, 13.4)
        traj = plan_lk(0.0, 5.0, v_ref)
        expect = meter_trajectory(EnergyModelParams(), traj.torque, traj.v[:-1], DT)
        assert traj.meta["planned_energy_j"] == pytest.approx(expect, rel=1e-12)

    def test_energy_weight_reduces_planned_energy(self):
        v_ref = np.full(HORIZON + 1, 13.4)
        base = plan_lk(0.0, 6.0, v_ref, weights=LkWeights(energy=0.0))
        saver = plan_lk(0.0, 6.0, v_ref, weights=LkWeights(energy=4.0))
        e0 = meter_trajectory(EnergyModelParams(), base.torque, base.v[:-1], DT)
        e1 = saver.meta["planned_energy_j"]
        assert e1 <= e0 + 1e-9

    def test_weight_sweep_monotone(self):
        v_ref = np.full(HORIZON + 1, 13.4)
        energies = []
        for w in (0.0, 0.5, 1.0, 2.0, 4.0):
            traj = plan_lk(0.0, 6.0, v_ref, weights=LkWeights(energy=w))
            assert traj.kind == "lk"
            energies.append(
                meter_trajectory(EnergyModelParams(), traj.torque, traj.v[:-1], DT))
        assert all(b <= a + 1e-6 for a, b in zip(energies, energies[1:]))

    def test_bad_reference_shape(self):
        with pytest.raises(ValueError):
            plan_lk(0.0, 5.0, np.zeros(HORIZON))

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            LkWeights(track=-1.0)

    def test_horizon_and_timing(self):
        v_ref = np.full(HORIZON + 1, 10.0)
        traj = plan_lk(0.0, 10.0, v_ref, t0=33.0)
        assert traj.horizon == HORIZON == 50
        assert traj.t[0] == 33.0
        assert traj.t[-1] == pytest.approx(38.0)
        assert traj.dt == pytest.approx(DT)
