import math

import numpy as np
import pytest

from multigait.core import (
    LegGeometry,
    RngStream,
    gravity_in_base,
    leg_forward_kinematics,
    leg_jacobian,
    quat_from_axis_angle,
    quat_identity,
    quat_mul,
    quat_normalize,
    standing_pose,
    world_to_heading,
)


class TestGravityInBase:
    def test_identity_orientation(self):
        np.testing.assert_allclose(gravity_in_base(quat_identity()), [0.0, 0.0, -1.0])

    def test_roll_180(self):
        q = quat_from_axis_angle([1.0, 0.0, 0.0], math.pi)
        np.testing.assert_allclose(gravity_in_base(q), [0.0, 0.0, 1.0], atol=1e-12)

    def test_pitch_90_nose_up(self):
        # nose-up quarter turn: world down maps onto -x of the base
        q = quat_from_axis_angle([0.0, 1.0, 0.0], -math.pi / 2)
        np.testing.assert_allclose(gravity_in_base(q), [-1.0, 0.0, 0.0], atol=1e-9)

    def test_unit_norm_for_random_quaternions(self, rng):
        for _ in range(10_000):
            q = quat_normalize(rng.standard_normal(4))
            g = gravity_in_base(q)
            assert abs(np.linalg.norm(g) - 1.0) < 1e-9

    def test_rejects_non_normalized(self):
        with pytest.raises(ValueError):
            gravity_in_base(np.array([1.0, 1.0, 0.0, 0.0]))


class TestWorldToHeading:
    def test_zero_yaw(self):
        np.testing.assert_allclose(world_to_heading([1.0, 0.0, 0.0], 0.0), [1.0, 0.0, 0.0])

    def test_quarter_turn(self):
        np.testing.assert_allclose(world_to_heading([1.0, 0.0, 0.0], math.pi / 2),
                                   [0.0, -1.0, 0.0], atol=1e-15)

    def test_z_invariant(self, rng):
        for yaw in rng.uniform(-math.pi, math.pi, size=20):
            out = world_to_heading([0.0, 0.0, 2.0], yaw)
            np.testing.assert_allclose(out, [0.0, 0.0, 2.0], atol=1e-15)

    def test_norm_preserving_and_invertible(self, rng):
        for _ in range(200):
            v = rng.standard_normal(3)
            yaw = float(rng.uniform(-10, 10))
            out = world_to_heading(v, yaw)
            assert abs(np.linalg.norm(out) - np.linalg.norm(v)) < 1e-12
            np.testing.assert_allclose(world_to_heading(out, -yaw), v, atol=1e-12)


class TestLegKinematics:
    def test_straight_leg(self):
        geo = LegGeometry()
        for leg in range(4):
            p = leg_forward_kinematics(leg, [0.0, 0.0, 0.0], geo)
            hip = geo.hip_position(leg)
            side = 1.0 if leg in (1, 3) else -1.0
            np.testing.assert_allclose(p[0], hip[0], atol=1e-15)
            np.testing.assert_allclose(p[1], hip[1] + side * geo.hip_offset, atol=1e-15)
            np.testing.assert_allclose(p[2], -(geo.thigh + geo.calf), atol=1e-15)

    def test_right_angle_knee(self):
        # hip pitch 0, knee -pi/2: calf swings forward, foot at thigh depth
        geo = LegGeometry()
        p = leg_forward_kinematics(0, [0.0, 0.0, -math.pi / 2], geo)
        hip = geo.hip_position(0)
        np.testing.assert_allclose(p[0] - hip[0], geo.calf, atol=1e-12)
        np.testing.assert_allclose(p[2], -geo.thigh, atol=1e-12)

    def test_mirrored_legs(self, rng):
        geo = LegGeometry()
        for _ in range(50):
            a, b, c = rng.uniform(-1.0, 1.0, size=3)
            right = leg_forward_kinematics(0, [a, b, c], geo)     # FR
            left = leg_forward_kinematics(1, [-a, b, c], geo)     # FL mirrored roll
            np.testing.assert_allclose(left[0], right[0], atol=1e-12)
            np.testing.assert_allclose(left[1], -right[1], atol=1e-12)
            np.testing.assert_allclose(left[2], right[2], atol=1e-12)

    def test_continuity_under_small_perturbations(self, rng):
        geo = LegGeometry()
        chain = geo.hip_offset + geo.thigh + geo.calf
        for _ in range(200):
            leg = int(rng.integers(0, 4))
            joints = rng.uniform(-1.5, 1.5, size=3)
            delta = rng.uniform(-1e-6, 1e-6, size=3)
            p0 = leg_forward_kinematics(leg, joints, geo)
            p1 = leg_forward_kinematics(leg, joints + delta, geo)
            assert np.linalg.norm(p1 - p0) <= chain * 1e-5

    def test_jacobian_matches_finite_differences(self, rng):
        geo = LegGeometry()
        for _ in range(20):
            leg = int(rng.integers(0, 4))
            joints = rng.uniform(-1.2, 1.2, size=3)
            jac = leg_jacobian(leg, joints, geo)
            eps = 1e-7
            for col in range(3):
                d = np.zeros(3)
                d[col] = eps
                num = (leg_forward_kinematics(leg, joints + d, geo)
                       - leg_forward_kinematics(leg, joints - d, geo)) / (2 * eps)
                np.testing.assert_allclose(jac[:, col], num, atol=1e-6)

    def test_invalid_leg_index(self):
        with pytest.raises(ValueError):
            leg_forward_kinematics(4, [0.0, 0.0, 0.0])

    def test_standing_pose_feet_below_hips(self):
        geo = LegGeometry()
        pose = standing_pose(geo, 0.30)
        for leg in range(4):
            p = leg_forward_kinematics(leg, pose[3 * leg:3 * leg + 3], geo)
            hip = geo.hip_position(leg)
            assert abs(p[0] - hip[0]) < 1e-9
            assert abs(p[2] + 0.30) < 1e-9


class TestQuaternionOps:
    def test_mul_identity(self, rng):
        q = quat_normalize(rng.standard_normal(4))
        np.testing.assert_allclose(quat_mul(quat_identity(), q), q)

    def test_normalize_rejects_zero(self):
        with pytest.raises(ValueError):
            quat_normalize([0.0, 0.0, 0.0, 0.0])


class TestRngStream:
    def test_same_seed_same_sequence(self):
        a = RngStream(42).uniform(size=100)
        b = RngStream(42).uniform(size=100)
        np.testing.assert_array_equal(a, b)

    def test_children_are_independent_and_deterministic(self):
        root1, root2 = RngStream(7), RngStream(7)
        sim1 = root1.child("sim").uniform(size=10)
        pol1 = root1.child("policy").uniform(size=10)
        sim2 = root2.child("sim").uniform(size=10)
        pol2 = root2.child("policy").uniform(size=10)
        np.testing.assert_array_equal(sim1, sim2)
        np.testing.assert_array_equal(pol1, pol2)
        assert not np.array_equal(sim1, pol1)

    def test_numbered_children(self):
        a = RngStream(3).numbered_child(5).standard_normal(4)
        b = RngStream(3).numbered_child(5).standard_normal(4)
        c = RngStream(3).numbered_child(6).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
