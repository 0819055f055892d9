"""Simplified floating-base quadruped dynamics.

The torso is a single rigid box carrying all mass; legs are massless
kinematic chains whose joints integrate PD torques against a reflected
inertia.  Point feet and the torso box corners interact with flat ground
through a spring-damper normal force and Coulomb-capped viscous friction.
Joint PD control runs at 1000 Hz inside control_step; policies act at
25 Hz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (
    LegGeometry,
    N_JOINTS,
    RngStream,
    gravity_in_base,
    quat_from_axis_angle,
    quat_identity,
    quat_mul,
    standing_pose,
)

PHYSICS_DT = 0.001
CONTROL_DT = 0.04
SUBSTEPS_PER_CONTROL = 40
EPISODE_STEPS = 250  # 10 s at 25 Hz

DEFAULT_JOINT_LOWER = np.array([-0.8, -1.0, -2.7] * 4)
DEFAULT_JOINT_UPPER = np.array([0.8, 3.9, -0.9] * 4)


class SimulationError(RuntimeError):
    """Raised when integration produces a non-finite or runaway state."""

    def __init__(self, message: str, field_name: str = ""):
        super().__init__(message)
        self.field_name = field_name


@dataclass
class PdGains:
    kp: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 40.0))
    kd: np.ndarray = field(default_factory=lambda: np.full(N_JOINTS, 1.0))
    torque_limit: float = 33.5

    def __post_init__(self):
        self.kp = np.broadcast_to(np.asarray(self.kp, dtype=float), (N_JOINTS,)).copy()
        self.kd = np.broadcast_to(np.asarray(self.kd, dtype=float), (N_JOINTS,)).copy()
        if np.any(self.kp <= 0.0):
            raise ValueError("kp must be positive")
        if np.any(self.kd < 0.0):
            raise ValueError("kd must be non-negative")
        if self.torque_limit <= 0.0:
            raise ValueError("torque limit must be positive")


@dataclass
class SimConfig:
    mass: float = 12.0
    box_dims: tuple[float, float, float] = (0.5, 0.3, 0.15)
    gravity: float = 9.81
    contact_kn: float = 5000.0
    contact_cn: float = 50.0
    friction_mu: float = 0.6
    friction_kt: float = 500.0
    joint_inertia: float = 0.03
    contact_threshold: float = 0.0
    body_contact_height: float = 0.03
    body_contact_forces: bool = True
    joint_vel_limit: float = 100.0
    base_height: float = 0.30
    geometry: LegGeometry = field(default_factory=LegGeometry)
    gains: PdGains = field(default_factory=PdGains)
    joint_lower: np.ndarray = field(default_factory=lambda: DEFAULT_JOINT_LOWER.copy())
    joint_upper: np.ndarray = field(default_factory=lambda: DEFAULT_JOINT_UPPER.copy())

    def inertia_diag(self) -> np.ndarray:
        dx, dy, dz = self.box_dims
        k = self.mass / 12.0
        return np.array([k * (dy * dy + dz * dz), k * (dx * dx + dz * dz), k * (dx * dx + dy * dy)])

    def pack(self) -> np.ndarray:
        """Flatten into the kernel parameter vector (see _substeps_py)."""
        par = np.zeros(71)
        par[0] = self.mass
        par[1:4] = self.inertia_diag()
        par[4] = self.gravity
        par[5] = self.contact_kn
        par[6] = self.contact_cn
        par[7] = self.friction_mu
        par[8] = self.friction_kt
        par[9] = self.joint_inertia
        par[10] = self.gains.torque_limit
        par[11] = self.contact_threshold
        par[12] = self.body_contact_height
        par[13] = self.joint_vel_limit
        par[14:17] = (self.box_dims[0] / 2.0, self.box_dims[1] / 2.0, self.box_dims[2] / 2.0)
        geo = self.geometry
        par[17:22] = (geo.hip_x, geo.hip_y, geo.hip_offset, geo.thigh, geo.calf)
        par[22:34] = self.gains.kp
        par[34:46] = self.gains.kd
        par[46:58] = self.joint_lower
        par[58:70] = self.joint_upper
        par[70] = 1.0 if self.body_contact_forces else 0.0
        return par


@dataclass
class RobotState:
    base_position: np.ndarray
    base_orientation: np.ndarray
    base_lin_vel: np.ndarray
    base_ang_vel: np.ndarray
    joint_pos: np.ndarray
    joint_vel: np.ndarray
    last_torques: np.ndarray
    foot_contact: np.ndarray          # 4 bools
    body_contact: bool
    foot_pos_world: np.ndarray        # (4, 3)
    foot_heights: np.ndarray          # (4,)
    foot_vel_world: np.ndarray        # (4, 3)
    phase: float = 0.0

    def copy(self) -> "RobotState":
        return RobotState(
            self.base_position.copy(), self.base_orientation.copy(),
            self.base_lin_vel.copy(), self.base_ang_vel.copy(),
            self.joint_pos.copy(), self.joint_vel.copy(), self.last_torques.copy(),
            self.foot_contact.copy(), self.body_contact,
            self.foot_pos_world.copy(), self.foot_heights.copy(),
            self.foot_vel_world.copy(), self.phase,
        )


@dataclass
class TrajectoryStep:
    time: float
    state: RobotState
    action: np.ndarray
    reward: float
    reward_terms: dict[str, float]
    expert_weights: np.ndarray | None
    ref_gait: str | None
    observation: np.ndarray | None = None
    log_prob: float | None = None


@dataclass
class Trajectory:
    steps: list[TrajectoryStep] = field(default_factory=list)
    goal: tuple[float, float] | None = None
    valid: bool = True
    failure: str = ""
    initial_state: RobotState | None = None
    final_observation: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.steps)

    def total_reward(self) -> float:
        return float(sum(s.reward for s in self.steps))


def pd_torques(q_des, q, q_dot, gains: PdGains) -> np.ndarray:
    """tau_i = kp_i (q_des_i - q_i) - kd_i qdot_i, clamped to the limit."""
    q_des = np.asarray(q_des, dtype=float)
    q = np.asarray(q, dtype=float)
    q_dot = np.asarray(q_dot, dtype=float)
    tau = gains.kp * (q_des - q) - gains.kd * q_dot
    return np.clip(tau, -gains.torque_limit, gains.torque_limit)


_BAD_STATE_FIELDS = (
    "base_position", "base_orientation", "base_lin_vel", "base_ang_vel",
    "joint_pos", "joint_vel",
)


def _find_bad_field(state: RobotState, config: SimConfig) -> str:
    for name in _BAD_STATE_FIELDS:
        if not np.all(np.isfinite(getattr(state, name))):
            return name
    if np.any(np.abs(state.joint_vel) > config.joint_vel_limit):
        return "joint_vel"
    return "state"


def _state_from_kernel(result, phase: float) -> RobotState:
    (_, _, pos, quat, lin_vel, ang_vel, joint_pos, joint_vel, torques,
     foot_pos, foot_vel, foot_h, contact, body_contact) = result
    return RobotState(
        base_position=pos,
        base_orientation=quat,
        base_lin_vel=lin_vel,
        base_ang_vel=ang_vel,
        joint_pos=joint_pos,
        joint_vel=joint_vel,
        last_torques=torques,
        foot_contact=contact.astype(bool),
        body_contact=bool(body_contact),
        foot_pos_world=foot_pos,
        foot_heights=foot_h,
        foot_vel_world=foot_vel,
        phase=phase,
    )


def step_physics(state: RobotState, torques, dt: float, config: SimConfig | None = None) -> RobotState:
    """One raw physics substep driven by explicit joint torques."""
    config = config or SimConfig()
    if dt == 0.0:
        return state.copy()
    result = kernels.torque_step(
        state.base_position, state.base_orientation, state.base_lin_vel,
        state.base_ang_vel, state.joint_pos, state.joint_vel,
        np.asarray(torques, dtype=float), float(dt), config.pack(),
    )
    new_state = _state_from_kernel(result, state.phase)
    if result[0] != 1:
        bad = _find_bad_field(new_state, config)
        raise SimulationError(f"integration produced a bad value in {bad}", bad)
    return new_state


def control_step(state: RobotState, action, config: SimConfig | None = None,
                 frequency: float = 0.0) -> tuple[RobotState, int]:
    """Hold desired joint positions for one 25 Hz control period.

    Runs exactly SUBSTEPS_PER_CONTROL substeps of PHYSICS_DT with PD
    torques recomputed each substep, then advances the gait phase.
    Returns (next state, substeps executed).
    """
    config = config or SimConfig()
    result = kernels.run_substeps(
        state.base_position, state.base_orientation, state.base_lin_vel,
        state.base_ang_vel, state.joint_pos, state.joint_vel,
        np.asarray(action, dtype=float), SUBSTEPS_PER_CONTROL, PHYSICS_DT,
        config.pack(),
    )
    phase = (state.phase + frequency * CONTROL_DT) % 1.0
    new_state = _state_from_kernel(result, phase)
    if result[0] != 1:
        bad = _find_bad_field(new_state, config)
        raise SimulationError(f"integration produced a bad value in {bad}", bad)
    return new_state, int(result[1])


def _derived_state(pos, quat, lin_vel, ang_vel, joint_pos, joint_vel,
                   config: SimConfig, phase: float) -> RobotState:
    result = kernels.torque_step(pos, quat, lin_vel, ang_vel, joint_pos, joint_vel,
                                 np.zeros(N_JOINTS), 0.0, config.pack())
    return _state_from_kernel(result, phase)


def reset(mode: str, rng: RngStream | None = None, config: SimConfig | None = None) -> RobotState:
    """Initial state: 'nominal' standing, or 'fallen'/'random_fall' on the ground."""
    config = config or SimConfig()
    if mode == "nominal":
        joints = standing_pose(config.geometry, config.base_height)
        return _derived_state(
            np.array([0.0, 0.0, config.base_height]), quat_identity(),
            np.zeros(3), np.zeros(3), joints, np.zeros(N_JOINTS), config, 0.0,
        )
    if mode in ("fallen", "random_fall"):
        if rng is None:
            raise ValueError(f"reset mode {mode!r} needs an RngStream")
        # tilt far enough from upright that |gravity_z in base| < 0.7
        tilt = rng.uniform(0.85, math.pi - 0.85)
        axis_angle = rng.uniform(0.0, 2.0 * math.pi)
        yaw = rng.uniform(-math.pi, math.pi)
        axis = np.array([math.cos(axis_angle), math.sin(axis_angle), 0.0])
        quat = quat_mul(quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), yaw),
                        quat_from_axis_angle(axis, tilt))
        joints = rng.uniform(config.joint_lower, config.joint_upper)
        probe = _derived_state(np.zeros(3), quat, np.zeros(3), np.zeros(3),
                               joints, np.zeros(N_JOINTS), config, 0.0)
        lowest = min(float(np.min(probe.foot_heights)), _lowest_corner(probe, config))
        height = 0.01 - lowest
        return _derived_state(np.array([0.0, 0.0, height]), quat, np.zeros(3),
                              np.zeros(3), joints, np.zeros(N_JOINTS), config, 0.0)
    raise ValueError(f"unknown reset mode {mode!r}")


def _lowest_corner(state: RobotState, config: SimConfig) -> float:
    from .core import quat_to_matrix

    r = quat_to_matrix(state.base_orientation)
    hx, hy, hz = (d / 2.0 for d in config.box_dims)
    corners = np.array([[sx * hx, sy * hy, sz * hz]
                        for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)])
    z = state.base_position[2] + (r @ corners.T)[2]
    return float(np.min(z))


def nominal_height_error(state: RobotState, config: SimConfig) -> float:
    return float(state.base_position[2] - config.base_height)


def upright_error(state: RobotState) -> float:
    g = gravity_in_base(state.base_orientation)
    return float(np.linalg.norm(g - np.array([0.0, 0.0, -1.0])))
