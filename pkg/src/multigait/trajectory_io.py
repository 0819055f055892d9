"""JSON-lines trajectory export.

One object per control step with keys: t, base_pos[3], base_quat[4],
base_vel[3], joint_pos[12], action[12], reward_terms{named},
expert_weights[5], contacts[4], ref_gait, goal[2].  Floats are serialized
at full round-trip precision, so re-importing reproduces values
bit-exactly.
"""

from __future__ import annotations

import json

import numpy as np

from .sim import Trajectory


def _floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values).ravel()]


def step_record(step, goal) -> dict:
    state = step.state
    weights = step.expert_weights
    return {
        "t": float(step.time),
        "base_pos": _floats(state.base_position),
        "base_quat": _floats(state.base_orientation),
        "base_vel": _floats(state.base_lin_vel),
        "joint_pos": _floats(state.joint_pos),
        "action": _floats(step.action),
        "reward_terms": {k: float(v) for k, v in sorted(step.reward_terms.items())},
        "expert_weights": _floats(weights) if weights is not None else [0.0] * 5,
        "contacts": [bool(c) for c in state.foot_contact],
        "ref_gait": step.ref_gait,
        "goal": [float(goal[0]), float(goal[1])] if goal is not None else None,
    }


def export_trajectory(trajectory: Trajectory, path: str) -> None:
    try:
        with open(path, "w") as f:
            for step in trajectory.steps:
                f.write(json.dumps(step_record(step, trajectory.goal)))
                f.write("\n")
    except OSError as err:
        raise OSError(f"could not export trajectory to {path}: {err}") from err


def append_trajectory(trajectory: Trajectory, f) -> None:
    for step in trajectory.steps:
        f.write(json.dumps(step_record(step, trajectory.goal)))
        f.write("\n")


def load_trajectory(path: str) -> list[dict]:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
