"""Reward shaping for single-skill and multi-skill locomotion.

Continuous terms use a radial basis function exp(alpha * |x_ref - x|^2)
with a negative shape parameter, peaking at 1 when the quantity matches
its reference.  Single-skill rewards weight eleven terms (orientation,
height, velocity, torque, joint velocity, body/foot ground contact,
symmetric foot placement, swing/stance, yaw rate, reference foot
contact); the multi-skill reward combines goal tracking, reference
contact matching gated by goal distance, and the remaining terms as
r = 0.6 r_g + 0.2 r_f + 0.2 r_e with each group scaled to [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import gravity_in_base, leg_forward_kinematics, quat_rotate_inv, quat_yaw, standing_pose, world_to_heading
from .gaits import GaitTable, GaitType, reference_contacts
from .sim import RobotState

ALPHA_ORIENTATION = -2.35
ALPHA_HEIGHT = -51.16
ALPHA_VELOCITY = -18.42
ALPHA_TORQUE = -0.004
ALPHA_JOINT_VEL = -0.032
ALPHA_PLACEMENT = -51.16
ALPHA_SWING = -460.50
ALPHA_YAW_RATE = -7.47
ALPHA_GOAL_POSITION = -0.74
ALPHA_GOAL_HEADING = -2.35

GOAL_GROUP_MAX = 16.0  # 8 + 4 + 4 with the velocity part scaled to [0, 1]
GOAL_DISTANCE_MAX = 15.0

UPRIGHT_GRAVITY = np.array([0.0, 0.0, -1.0])
HEADING_FORWARD = np.array([1.0, 0.0, 0.0])


def rbf(x, x_ref, alpha: float) -> float:
    """exp(alpha * |x_ref - x|^2) for scalars or same-shape vectors."""
    if alpha >= 0.0:
        raise ValueError("rbf shape parameter must be negative")
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x.shape != x_ref.shape:
        raise ValueError(f"rbf shape mismatch: {x.shape} vs {x_ref.shape}")
    diff = x_ref - x
    return float(np.exp(alpha * np.sum(diff * diff)))


TERM_NAMES = (
    "orientation", "height", "velocity", "torque", "joint_velocity",
    "body_clearance", "foot_contact", "foot_placement", "swing_stance",
    "yaw_rate", "contact_match",
)


@dataclass(frozen=True)
class RewardWeights:
    orientation: float
    height: float
    velocity: float
    torque: float
    joint_velocity: float
    body_clearance: float
    foot_contact: float
    foot_placement: float
    swing_stance: float
    yaw_rate: float
    contact_match: float

    def __post_init__(self):
        if any(v < 0.0 for v in self.as_vector()):
            raise ValueError("reward weights must be non-negative")

    def as_vector(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in TERM_NAMES)

    @classmethod
    def fall_recovery(cls) -> "RewardWeights":
        return cls(0.189, 0.189, 0.114, 0.076, 0.076, 0.083, 0.083, 0.189, 0.000, 0.000, 0.000)

    @classmethod
    def gaits(cls) -> "RewardWeights":
        return cls(0.068, 0.068, 0.170, 0.017, 0.017, 0.048, 0.000, 0.034, 0.034, 0.068, 0.476)

    @classmethod
    def standstill_probe(cls) -> "RewardWeights":
        """Orientation + height only; reduced task for training probes."""
        return cls(0.189, 0.189, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def preset(cls, task: GaitType) -> "RewardWeights":
        return cls.fall_recovery() if task == GaitType.RECOVERY else cls.gaits()


def _default_foot_targets() -> np.ndarray:
    pose = standing_pose()
    return np.stack([leg_forward_kinematics(leg, pose[3 * leg:3 * leg + 3]) for leg in range(4)])


@dataclass
class TaskReferences:
    base_height: float = 0.30
    foot_swing_height: float = 0.09
    velocity_trot: float = 0.8
    velocity_bound: float = 1.5
    velocity_cap: float = 5.0
    nominal_foot_positions: np.ndarray = field(default_factory=_default_foot_targets)

    def __post_init__(self):
        if self.base_height <= 0.0:
            raise ValueError("target base height must be positive")
        self.nominal_foot_positions = np.asarray(self.nominal_foot_positions, dtype=float).reshape(4, 3)

    def desired_velocity(self, task: GaitType) -> float | None:
        """Heading-frame forward speed target; None = maximize (gallop)."""
        if task == GaitType.GALLOP:
            return None
        if task == GaitType.BOUND:
            return self.velocity_bound
        if task in (GaitType.TROT, GaitType.PACE):
            return self.velocity_trot
        return 0.0


@dataclass(frozen=True)
class SwitchCriteria:
    x1: float
    x2: float

    def __post_init__(self):
        if not (0.0 <= self.x1 < self.x2 <= GOAL_DISTANCE_MAX):
            raise ValueError(f"switch criteria need 0 <= x1 < x2 <= {GOAL_DISTANCE_MAX}, got ({self.x1}, {self.x2})")

    def as_tuple(self) -> tuple[float, float]:
        return (self.x1, self.x2)


@dataclass(frozen=True)
class Goal:
    distance: float
    angle: float

    def __post_init__(self):
        if not (0.0 <= self.distance <= GOAL_DISTANCE_MAX):
            raise ValueError(f"goal distance must be in [0, {GOAL_DISTANCE_MAX}]")
        if not (-math.pi < self.angle <= math.pi):
            raise ValueError("goal angle must be in (-pi, pi]")

    @property
    def position(self) -> np.ndarray:
        return np.array([self.distance * math.cos(self.angle), self.distance * math.sin(self.angle)])

    @classmethod
    def sample(cls, rng) -> "Goal":
        return cls(float(rng.uniform(0.0, GOAL_DISTANCE_MAX)), float(rng.uniform(-math.pi, math.pi)))


def contact_match_reward(actual, reference) -> float:
    """Fraction of the four feet whose stance flag matches the reference."""
    actual = np.asarray(actual, dtype=bool).reshape(4)
    reference = np.asarray(reference, dtype=bool).reshape(4)
    return float(np.mean(actual == reference))


def select_reference_gait(d: float, criteria: SwitchCriteria) -> GaitType:
    """Distance-gated reference gait: trot / bound / gallop."""
    if d < 0.0:
        raise ValueError("goal distance must be non-negative")
    if d < criteria.x1:
        return GaitType.TROT
    if d < criteria.x2:
        return GaitType.BOUND
    return GaitType.GALLOP


def _heading_velocity(state: RobotState) -> np.ndarray:
    return world_to_heading(state.base_lin_vel, quat_yaw(state.base_orientation))


def _velocity_term(state: RobotState, task: GaitType, refs: TaskReferences) -> float:
    v_des = refs.desired_velocity(task)
    if v_des is None:
        vx = min(abs(float(state.base_lin_vel[0])), refs.velocity_cap)
        return vx * vx
    v_hf = _heading_velocity(state)
    return rbf(v_hf, np.array([v_des, 0.0, 0.0]), ALPHA_VELOCITY)


def _placement_term(state: RobotState, task: GaitType, refs: TaskReferences) -> float:
    if task == GaitType.RECOVERY:
        feet = np.stack([leg_forward_kinematics(leg, state.joint_pos[3 * leg:3 * leg + 3]) for leg in range(4)])
        return rbf(feet.ravel(), refs.nominal_foot_positions.ravel(), ALPHA_PLACEMENT)
    mean_foot = state.foot_pos_world.mean(axis=0)
    return rbf(mean_foot, state.base_position, ALPHA_PLACEMENT)


def _swing_stance_term(state: RobotState, refs: TaskReferences) -> float:
    speed = np.sqrt(state.foot_vel_world[:, 0] ** 2 + state.foot_vel_world[:, 1] ** 2)
    actual = state.foot_heights * speed
    target = refs.foot_swing_height * speed
    return rbf(actual, target, ALPHA_SWING)


def single_skill_terms(state: RobotState, task: GaitType, refs: TaskReferences,
                       gait_table: GaitTable | None = None) -> dict[str, float]:
    """All Table-style reward terms, unweighted, for one task."""
    gravity = gravity_in_base(state.base_orientation)
    terms = {
        "orientation": rbf(gravity, UPRIGHT_GRAVITY, ALPHA_ORIENTATION),
        "height": rbf(float(state.base_position[2]), refs.base_height, ALPHA_HEIGHT),
        "velocity": _velocity_term(state, task, refs),
        "torque": rbf(state.last_torques, np.zeros(12), ALPHA_TORQUE),
        "joint_velocity": rbf(state.joint_vel, np.zeros(12), ALPHA_JOINT_VEL),
        "body_clearance": 0.0 if state.body_contact else 1.0,
        "foot_contact": 1.0 if bool(np.any(state.foot_contact)) else 0.0,
        "foot_placement": _placement_term(state, task, refs),
        "swing_stance": _swing_stance_term(state, refs),
        "yaw_rate": rbf(float(state.base_ang_vel[2]), 0.0, ALPHA_YAW_RATE),
    }
    if task == GaitType.RECOVERY:
        terms["contact_match"] = 0.0
    else:
        reference = reference_contacts(task, state.phase, gait_table)
        terms["contact_match"] = contact_match_reward(state.foot_contact, reference)
    return terms


def single_skill_reward(state: RobotState, task: GaitType, refs: TaskReferences,
                        weights: RewardWeights, gait_table: GaitTable | None = None) -> tuple[float, dict[str, float]]:
    """Weighted sum of all reward terms; returns (total, weighted breakdown)."""
    terms = single_skill_terms(state, task, refs, gait_table)
    weighted = {name: getattr(weights, name) * terms[name] for name in TERM_NAMES}
    return float(sum(weighted.values())), weighted


def goal_reward(state: RobotState, goal: Goal, refs: TaskReferences) -> tuple[float, dict[str, float]]:
    """Target-following reward r_g and its components.

    r_g = r_hz * r_phi * (8 r_pg + 4 r_vg / cap^2 + 4 r_phig); the velocity
    part is divided by the cap squared so the group maximum is 16.
    """
    delta = goal.position - state.base_position[:2]
    d = float(np.linalg.norm(delta))
    r_pg = math.exp(ALPHA_GOAL_POSITION * d * d)
    if d < 0.01:
        r_vg = 0.0
        r_phig = 1.0
    else:
        direction = delta / d
        v_toward = float(state.base_lin_vel[:2] @ direction)
        v_toward = min(max(v_toward, 0.0), refs.velocity_cap)
        r_vg = v_toward * v_toward
        u_base = quat_rotate_inv(state.base_orientation, np.array([direction[0], direction[1], 0.0]))
        r_phig = rbf(u_base, HEADING_FORWARD, ALPHA_GOAL_HEADING)
    r_hz = rbf(float(state.base_position[2]), refs.base_height, ALPHA_HEIGHT)
    r_phi = rbf(gravity_in_base(state.base_orientation), UPRIGHT_GRAVITY, ALPHA_ORIENTATION)
    cap_sq = refs.velocity_cap * refs.velocity_cap
    r_g = r_hz * r_phi * (8.0 * r_pg + 4.0 * r_vg / cap_sq + 4.0 * r_phig)
    components = {"r_pg": r_pg, "r_vg": r_vg, "r_phig": r_phig, "r_hz": r_hz, "r_phi": r_phi}
    return float(r_g), components


GROUP_WEIGHTS = (0.6, 0.2, 0.2)


def multi_skill_reward(state: RobotState, goal: Goal, criteria: SwitchCriteria,
                       refs: TaskReferences, gait_table: GaitTable | None = None,
                       ) -> tuple[float, dict[str, float]]:
    """0.6 r_g + 0.2 r_f + 0.2 r_e with each group in [0, 1].

    r_f matches the distance-selected reference contact pattern; r_e is
    the remaining single-skill terms under the gaits preset (reference
    contact excluded), renormalized to [0, 1].  For a gallop reference
    the velocity term becomes capped forward speed squared, scaled to
    [0, 1], keeping the group bounded.
    """
    d = float(np.linalg.norm(goal.position - state.base_position[:2]))
    ref_gait = select_reference_gait(d, criteria)

    r_g, goal_terms = goal_reward(state, goal, refs)
    reference = reference_contacts(ref_gait, state.phase, gait_table)
    r_f = contact_match_reward(state.foot_contact, reference)

    weights = RewardWeights.gaits()
    terms = single_skill_terms(state, ref_gait, refs, gait_table)
    if ref_gait == GaitType.GALLOP:
        v_fwd = min(max(float(_heading_velocity(state)[0]), 0.0), refs.velocity_cap)
        terms["velocity"] = (v_fwd / refs.velocity_cap) ** 2
    included = [name for name in TERM_NAMES if name != "contact_match"]
    weight_sum = sum(getattr(weights, name) for name in included)
    r_e = sum(getattr(weights, name) * terms[name] for name in included) / weight_sum

    r_g_norm = r_g / GOAL_GROUP_MAX
    total = GROUP_WEIGHTS[0] * r_g_norm + GROUP_WEIGHTS[1] * r_f + GROUP_WEIGHTS[2] * r_e
    breakdown = {
        "r_g": r_g,
        "r_g_norm": r_g_norm,
        "r_f": r_f,
        "r_e": r_e,
        "goal_distance": d,
        "ref_gait": float(list(GaitType).index(ref_gait)),
        **goal_terms,
    }
    return float(total), breakdown
