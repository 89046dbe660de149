import math

import numpy as np
import pytest

from ecolane.dynamics import VehicleParams
from ecolane.planner_lc import (
    D_MIN,
    DT,
    HORIZON,
    FreeSpaceGap,
    LaneChangeInfeasible,
    LcBounds,
    SvPolytope,
    enlarge_sv,
    enumerate_gaps,
    plan_lc,
    rect_distance,
    select_free_space,
    verify_clearance,
)
from ecolane.world import RoadNetwork, lane_center_offset

VEH = VehicleParams()
ROAD = RoadNetwork()  # two 3.5 m lanes, 600 m
Y1 = lane_center_offset(ROAD, 1)


def sampled_rect_distance(p_s, p_y, c_s, c_y, half_l, half_w, n=4000):
    """Brute-force oracle: min distance to a dense boundary sampling, zero
    when the point lies inside the (solid) rectangle.
    """
    if abs(p_s - c_s) <= half_l and abs(p_y - c_y) <= half_w:
        return 0.0
    ts = np.linspace(-1.0, 1.0, n)
    edges = [
        (c_s + half_l * ts, np.full(n, c_y - half_w)),
        (c_s + half_l * ts, np.full(n, c_y + half_w)),
        (np.full(n, c_s - half_l), c_y + half_w * ts),
        (np.full(n, c_s + half_l), c_y + half_w * ts),
    ]
    best = math.inf
    for xs, ys in edges:
        best = min(best, float(np.min(np.hypot(xs - p_s, ys - p_y))))
    return best


class TestRectDistance:
    def test_center_is_zero(self):
        assert rect_distance(10.0, 2.0, 10.0, 2.0, 3.0, 1.0) == 0.0

    def test_inside_is_zero(self):
        assert rect_distance(11.5, 2.5, 10.0, 2.0, 3.0, 1.0) == 0.0

    def test_face_distance(self):
        # 2.0 m laterally beyond the top face
        assert rect_distance(10.0, 5.0, 10.0, 2.0, 3.0, 1.0) == pytest.approx(2.0)

    def test_corner_distance(self):
        d = rect_distance(14.0, 4.0, 10.0, 2.0, 3.0, 1.0)
        assert d == pytest.approx(math.hypot(1.0, 1.0))

    def test_matches_sampling_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            c_s, c_y = rng.uniform(-20, 20, 2)
            half_l, half_w = rng.uniform(0.5, 6.0, 2)
            p_s, p_y = rng.uniform(-35, 35, 2)
            got = rect_distance(p_s, p_y, c_s, c_y, half_l, half_w)
            ref = sampled_rect_distance(p_s, p_y, c_s, c_y, half_l, half_w)
            assert got == pytest.approx(ref, abs=1e-5)


class TestEnlargeSv:
    def test_equal_footprints(self):
        sv = SvPolytope(s=100.0, v=0.0, e_y=3.5, length=5.0, width=2.0)
        half_l, half_w = enlarge_sv(sv, VEH)
        assert (half_l, half_w) == (5.0, 2.0)
        # rectangle [95, 105] x [1.5, 5.5]
        assert (sv.s - half_l, sv.s + half_l) == (95.0, 105.0)
        assert (sv.e_y - half_w, sv.e_y + half_w) == (1.5, 5.5)

    def test_point_ego_keeps_sv_footprint(self):
        ego = VehicleParams(length=0.0, width=0.0)
        sv = SvPolytope(s=50.0, v=0.0, e_y=0.0, length=4.2, width=1.8)
        assert enlarge_sv(sv, ego) == (2.1, 0.9)

    def test_contains_sv_center(self):
        sv = SvPolytope(s=30.0, v=0.0, e_y=3.5)
        half_l, half_w = enlarge_sv(sv, VEH)
        assert rect_distance(sv.s, sv.e_y, sv.s, sv.e_y, half_l, half_w) == 0.0


class TestGaps:
    def test_empty_lane_is_one_unbounded_gap(self):
        gaps = enumerate_gaps([], Y1, ROAD.lane_width, VEH)
        assert len(gaps) == 1
        assert gaps[0].lo == -math.inf and gaps[0].hi == math.inf

    def test_one_sv_splits_lane(self):
        sv = SvPolytope(s=100.0, v=10.0, e_y=Y1)
        gaps = enumerate_gaps([sv], Y1, ROAD.lane_width, VEH)
        assert len(gaps) == 2
        c_end = 100.0 + HORIZON * DT * 10.0
        half_l, _ = enlarge_sv(sv, VEH)
        assert gaps[0].hi == pytest.approx(c_end - half_l - D_MIN)
        assert gaps[1].lo == pytest.approx(c_end + half_l + D_MIN)

    def test_other_lane_sv_ignored(self):
        sv = SvPolytope(s=100.0, v=10.0, e_y=0.0)
        gaps = enumerate_gaps([sv], Y1, ROAD.lane_width, VEH)
        assert len(gaps) == 1

    def test_touching_footprints_merge(self):
        svs = [
            SvPolytope(s=100.0, v=0.0, e_y=Y1),
            SvPolytope(s=106.0, v=0.0, e_y=Y1),  # spans overlap after widening
        ]
        gaps = enumerate_gaps(svs, Y1, ROAD.lane_width, VEH)
        assert len(gaps) == 2


class TestSelectFreeSpace:
    def test_projection_gap_preferred(self):
        gaps = [FreeSpaceGap(-math.inf, 80.0), FreeSpaceGap(90.0, math.inf)]
        choice = select_free_space(gaps, s0=0.0, v0=10.0, vehicle=VEH)
        # projection 50 m falls in the first gap, which is long enough
        assert choice is gaps[0]

    def test_short_projection_gap_rejected(self):
        # projection at 50 m sits in a 12 m pocket, shorter than 2*d_safe
        gaps = [
            FreeSpaceGap(-math.inf, 44.0),
            FreeSpaceGap(44.0, 56.0),
            FreeSpaceGap(56.0, math.inf),
        ]
        choice = select_free_space(gaps, s0=0.0, v0=10.0, vehicle=VEH)
        assert choice is not gaps[1]
        assert choice.length == math.inf

    def test_unreachable_gaps_raise(self):
        # only gap starts 10 km downstream: unreachable in 5 s
        gaps = [FreeSpaceGap(10_000.0, math.inf)]
        with pytest.raises(LaneChangeInfeasible):
            select_free_space(gaps, s0=0.0, v0=10.0, vehicle=VEH)


def check_lc_invariants(traj, svs=(), y_target=Y1, tol=1e-6):
    assert traj.kind == "lc"
    assert np.all(np.abs(traj.kappa) <= 0.1 + tol)
    ay = traj.v[:-1] ** 2 * traj.kappa
    assert np.all(np.abs(ay) <= 3.0 + tol)
    assert np.all(traj.v >= -tol) and np.all(traj.v <= VEH.v_max + tol)
    assert np.all(traj.torque >= VEH.torque_min - tol)
    assert np.all(traj.torque <= VEH.torque_max + tol)
    assert abs(traj.e_y[-1] - y_target) <= 0.1 + tol
    assert abs(traj.e_psi[-1]) <= 0.1 + tol
    report = verify_clearance(traj, list(svs), VEH)
    assert report["violations"] == 0 and report["ok"]


class TestPlanLc:
    def test_empty_road_change(self):
        traj = plan_lc(np.array([0.0, 10.0, 0.0, 0.0]), target_lane=1, road=ROAD)
        check_lc_invariants(traj)
        assert traj.horizon == HORIZON
        # solved inputs re-rolled through the model: defect at machine precision
        assert traj.dynamics_residual(VEH) <= 1e-10

    def test_already_at_target(self):
        traj = plan_lc(np.array([0.0, 10.0, Y1, 0.0]), target_lane=1, road=ROAD)
        check_lc_invariants(traj)
        assert np.max(np.abs(traj.kappa)) <= 1e-3
        assert np.max(np.abs(traj.e_y - Y1)) <= 0.05

    def test_sv_in_target_lane_cleared(self):
        svs = [SvPolytope(s=30.0, v=9.0, e_y=Y1)]
        traj = plan_lc(np.array([0.0, 10.0, 0.0, 0.0]), target_lane=1, road=ROAD, svs=svs)
        check_lc_invariants(traj, svs)

    def test_duals_certify_clearance(self):
        svs = [SvPolytope(s=25.0, v=8.0, e_y=Y1)]
        traj = plan_lc(np.array([0.0, 10.0, 0.0, 0.0]), target_lane=1, road=ROAD, svs=svs)
        duals = traj.meta["duals"]
        assert duals.shape == (1, HORIZON + 1, 4)
        c_s, c_y, half_l, half_w = traj.meta["sv_boxes"][0]
        tol = 1e-6
        for i in range(HORIZON + 1):
            lam = duals[0, i]
            assert np.all(lam >= -tol)
            a_t_lam = np.array([lam[0] - lam[1], lam[2] - lam[3]])
            assert a_t_lam @ a_t_lam <= 1.0 + tol
            e = np.array([
                traj.s[i] - c_s[i] - half_l,
                -traj.s[i] + c_s[i] - half_l,
                traj.e_y[i] - c_y - half_w,
                -traj.e_y[i] + c_y - half_w,
            ])
            certified = float(lam @ e)
            assert certified >= D_MIN - tol
            # weak duality: certificate never beats the true distance
            true = rect_distance(traj.s[i], traj.e_y[i], c_s[i], c_y, half_l, half_w)
            assert certified <= true + 1e-5

    def test_terminal_inside_selected_gap(self):
        svs = [SvPolytope(s=45.0, v=10.0, e_y=Y1)]
        traj = plan_lc(np.array([0.0, 10.0, 0.0, 0.0]), target_lane=1, road=ROAD, svs=svs)
        lo, hi = traj.meta["gap"]
        assert lo - 1e-6 <= traj.s[-1] <= hi + 1e-6

    def test_u_pin_exact(self):
        traj = plan_lc(np.array([0.0, 10.0, 0.0, 0.0]), target_lane=1, road=ROAD,
                       u_pin=(150.0, 0.01))
        assert traj.torque[0] == pytest.approx(150.0, abs=1e-9)
        assert traj.kappa[0] == pytest.approx(0.01, abs=1e-12)

    def test_blocked_lane_is_infeasible(self):
        # nose-to-tail wall at ego speed: every gap is out of reach
        svs = [SvPolytope(s=sm, v=10.0, e_y=Y1) for sm in np.arange(-40.0, 120.0, 10.0)]
        with pytest.raises(LaneChangeInfeasible):
            plan_lc(np.array([0.0, 10.0, 0.0, 0.0]), target_lane=1, road=ROAD, svs=svs)

    def test_bad_state_shape(self):
        with pytest.raises(ValueError):
            plan_lc(np.zeros(3), target_lane=1, road=ROAD)

    def test_bounds_from_road(self):
        bnd = LcBounds.from_road(ROAD, VEH)
        assert bnd.e_y_lo == pytest.approx(-0.75)
        assert bnd.e_y_hi == pytest.approx(4.25)
        assert bnd.kappa_bnd == 0.1 and bnd.ay_bnd == 3.0
        assert bnd.e_psi_bnd == pytest.approx(0.5 * math.pi)


class TestVerifyClearance:
    def _straight_traj(self, e_y=0.0, v=10.0):
        n = 10
        return_dict = dict(
            t=DT * np.arange(n + 1),
            s=v * DT * np.arange(n + 1),
            v=np.full(n + 1, v),
            e_y=np.full(n + 1, e_y),
            e_psi=np.zeros(n + 1),
            torque=np.zeros(n),
            kappa=np.zeros(n),
            kappa_road=np.zeros(n),
            kind="lc",
        )
        from ecolane.trajectory import PlannedTrajectory

        return PlannedTrajectory(**return_dict)

    def test_collision_detected(self):
        traj = self._straight_traj(e_y=0.0)
        svs = [SvPolytope(s=5.0, v=10.0, e_y=0.0)]  # rides on top of the ego
        report = verify_clearance(traj, svs, VEH)
        assert not report["ok"]
        assert report["violations"] > 0
        assert report["min_distance"] == 0.0

    def test_clear_lane_passes(self):
        traj = self._straight_traj(e_y=0.0)
        svs = [SvPolytope(s=5.0, v=10.0, e_y=7.0)]
        report = verify_clearance(traj, svs, VEH)
        assert report["ok"] and report["violations"] == 0
        assert report["min_distance"] == pytest.approx(5.0)  # 7 - 2 (enlarged half width)

    def test_no_svs_trivially_ok(self):
        report = verify_clearance(self._straight_traj(), [], VEH)
        assert report["ok"]
        assert report["min_distance"] == math.inf
