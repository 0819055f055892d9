"""Math primitives shared by the simulator, policies, and optimizers.

Conventions used throughout the package:

- Quaternions are ``(w, x, y, z)`` and rotate base-frame vectors into the
  world frame: ``v_world = quat_rotate(q, v_base)``.
- The joint vector has 12 entries ordered (FR, FL, RR, RL) x (hip roll,
  hip pitch, knee), all in radians.  This matches the Unitree A1 SDK leg
  order; the choice is a convention, not a physical requirement.
- The heading frame shares the world z-axis and is rotated by base yaw only.
- All arrays are float64.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

N_LEGS = 4
N_JOINTS = 12
LEG_NAMES = ("FR", "FL", "RR", "RL")
# Sign of the lateral hip offset: -1 for right legs, +1 for left legs.
LEG_SIDE = (-1.0, 1.0, -1.0, 1.0)

WORLD_DOWN = np.array([0.0, 0.0, -1.0])
QUAT_NORM_TOL = 1e-6


def vec3(x: float = 0.0, y: float = 0.0, z: float = 0.0) -> np.ndarray:
    return np.array([float(x), float(y), float(z)])


def joint_vector(values=None) -> np.ndarray:
    if values is None:
        return np.zeros(N_JOINTS)
    out = np.asarray(values, dtype=float).reshape(-1)
    if out.shape != (N_JOINTS,):
        raise ValueError(f"joint vector must have {N_JOINTS} entries, got {out.shape}")
    return out.copy()


# ---------------------------------------------------------------------------
# Quaternions
# ---------------------------------------------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    if n <= 0.0 or not math.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite quaternion")
    return q / n


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return quat_identity()
    half = 0.5 * float(angle)
    s = math.sin(half) / n
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix mapping base-frame vectors to the world frame."""
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_rotate(q, v) -> np.ndarray:
    return quat_to_matrix(q) @ np.asarray(v, dtype=float)


def quat_rotate_inv(q, v) -> np.ndarray:
    return quat_to_matrix(q).T @ np.asarray(v, dtype=float)


def quat_yaw(q) -> float:
    """Yaw (rotation about world z) of the base x-axis, in radians."""
    w, x, y, z = q
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def quat_integrate(q, omega_body, dt: float) -> np.ndarray:
    """Advance q by body-frame angular velocity over dt, then renormalize."""
    w = np.asarray(omega_body, dtype=float)
    dq = quat_mul(q, np.array([0.0, w[0], w[1], w[2]]))
    out = np.asarray(q, dtype=float) + 0.5 * dt * dq
    return quat_normalize(out)


def roll_pitch(q) -> tuple[float, float]:
    """Roll and pitch (Z-Y-X Euler) of the base orientation."""
    w, x, y, z = q
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    s = 2.0 * (w * y - z * x)
    s = max(-1.0, min(1.0, s))
    return roll, math.asin(s)


# ---------------------------------------------------------------------------
# Reference frames
# ---------------------------------------------------------------------------

def gravity_in_base(orientation) -> np.ndarray:
    """World down-vector [0, 0, -1] expressed in the base frame (unit norm)."""
    q = np.asarray(orientation, dtype=float)
    n = np.linalg.norm(q)
    if abs(n - 1.0) > QUAT_NORM_TOL:
        raise ValueError(f"orientation quaternion has norm {n!r}, expected 1")
    return quat_rotate_inv(q, WORLD_DOWN)


def world_to_heading(v, yaw: float) -> np.ndarray:
    """Rotate v by -yaw about the world z-axis (z-component unchanged)."""
    v = np.asarray(v, dtype=float)
    c = math.cos(yaw)
    s = math.sin(yaw)
    return np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]])


# ---------------------------------------------------------------------------
# Leg kinematics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LegGeometry:
    """3-link serial leg: lateral hip offset, thigh, calf (A1-like defaults)."""

    hip_offset: float = 0.0838
    thigh: float = 0.2
    calf: float = 0.2
    hip_x: float = 0.1805
    hip_y: float = 0.047

    def hip_position(self, leg_index: int) -> np.ndarray:
        sx = 1.0 if leg_index < 2 else -1.0
        sy = LEG_SIDE[leg_index]
        return np.array([sx * self.hip_x, sy * self.hip_y, 0.0])


def leg_forward_kinematics(leg_index: int, joint_triplet, geometry: LegGeometry | None = None) -> np.ndarray:
    """Foot point position in the base frame for one leg.

    The chain is: hip mount -> hip roll about x -> lateral offset -> hip
    pitch about y -> thigh -> knee about y -> calf.  Zero joint angles leave
    the leg fully extended straight down.
    """
    if leg_index not in range(N_LEGS):
        raise ValueError(f"leg_index must be 0..3, got {leg_index}")
    geo = geometry or LegGeometry()
    a, b, c = (float(v) for v in joint_triplet)
    side = LEG_SIDE[leg_index]
    l1, l2 = geo.thigh, geo.calf
    ux = -l1 * math.sin(b) - l2 * math.sin(b + c)
    uy = side * geo.hip_offset
    uz = -l1 * math.cos(b) - l2 * math.cos(b + c)
    ca, sa = math.cos(a), math.sin(a)
    local = np.array([ux, ca * uy - sa * uz, sa * uy + ca * uz])
    return geo.hip_position(leg_index) + local


def leg_jacobian(leg_index: int, joint_triplet, geometry: LegGeometry | None = None) -> np.ndarray:
    """3x3 Jacobian of the foot position w.r.t. (hip roll, hip pitch, knee)."""
    geo = geometry or LegGeometry()
    a, b, c = (float(v) for v in joint_triplet)
    side = LEG_SIDE[leg_index]
    l1, l2 = geo.thigh, geo.calf
    ux = -l1 * math.sin(b) - l2 * math.sin(b + c)
    uy = side * geo.hip_offset
    uz = -l1 * math.cos(b) - l2 * math.cos(b + c)
    dux_db = -l1 * math.cos(b) - l2 * math.cos(b + c)
    duz_db = l1 * math.sin(b) + l2 * math.sin(b + c)
    dux_dc = -l2 * math.cos(b + c)
    duz_dc = l2 * math.sin(b + c)
    ca, sa = math.cos(a), math.sin(a)
    # d(Rx(a) u)/da = x_hat x (Rx(a) u)
    ry = ca * uy - sa * uz
    rz = sa * uy + ca * uz
    col_a = np.array([0.0, -rz, ry])
    col_b = np.array([dux_db, -sa * duz_db, ca * duz_db])
    col_c = np.array([dux_dc, -sa * duz_dc, ca * duz_dc])
    return np.stack([col_a, col_b, col_c], axis=1)


def standing_pose(geometry: LegGeometry | None = None, base_height: float = 0.30) -> np.ndarray:
    """Joint vector with every foot directly below its hip at base_height."""
    geo = geometry or LegGeometry()
    reach = base_height
    total = geo.thigh + geo.calf
    cos_b = min(1.0, reach / total)
    b = math.acos(cos_b)
    pose = np.zeros(N_JOINTS)
    for leg in range(N_LEGS):
        pose[3 * leg + 1] = b
        pose[3 * leg + 2] = -2.0 * b
    return pose


# ---------------------------------------------------------------------------
# Seeded randomness
# ---------------------------------------------------------------------------

@dataclass
class RngStream:
    """Deterministic random stream with named, independent substreams.

    Backed by PCG64, so identical seeds give identical draw sequences on
    every platform.  Streams are single-owner: hand them off, never share.
    """

    seed: int
    key: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=self.key)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, name: str) -> "RngStream":
        digest = hashlib.sha256(name.encode("utf-8")).digest()
        sub = int.from_bytes(digest[:4], "little")
        return RngStream(self.seed, self.key + (sub,))

    def numbered_child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.key + (int(index) & (2**32 - 1),))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._gen.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size)

    def choice(self, n, size=None, replace=True):
        return self._gen.choice(n, size=size, replace=replace)
