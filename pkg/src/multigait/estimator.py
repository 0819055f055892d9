"""Supervised base-velocity estimator.

Maps a 66-dim proprioceptive vector, gravity vector, base angular
velocity, and joint positions each with a two-step history, plus current
joint velocities, to the 3-dim base linear velocity in the heading
frame.  Trained with MSE on pairs collected from simulation rollouts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RngStream, gravity_in_base, quat_rotate_inv, standing_pose
from .env import EnvSettings, EpisodeSpec, run_episode
from .gaits import GaitType
from .nn import Adam, Mlp
from .policy import heading_frame_velocity
from .sim import RobotState

INPUT_DIM = 66
HISTORY = 3  # t, t-1, t-2


def _proprio(state: RobotState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    gravity = gravity_in_base(state.base_orientation)
    ang_body = quat_rotate_inv(state.base_orientation, state.base_ang_vel)
    return gravity, ang_body, state.joint_pos


def build_estimator_input(states) -> np.ndarray:
    """66-dim input from 3 consecutive control-step states, oldest first.

    Blocks are ordered (t, t-1, t-2): gravity history (9), angular
    velocity history (9), joint position history (36), then current joint
    velocities (12).
    """
    states = list(states)
    if len(states) != HISTORY:
        raise ValueError(f"estimator input needs {HISTORY} states, got {len(states)}")
    newest_first = states[::-1]
    gravity, ang, joints = zip(*(_proprio(s) for s in newest_first))
    return np.concatenate([*gravity, *ang, *joints, newest_first[0].joint_vel])


def make_estimator_net(rng: RngStream, hidden=(256, 256)) -> Mlp:
    return Mlp.initialize((INPUT_DIM, *hidden, 3), rng)


def estimate_velocity(net: Mlp, states) -> np.ndarray:
    return net.forward(build_estimator_input(states))


def estimator_velocity_fn(net: Mlp):
    """Adapter for run_episode's velocity hook."""
    return lambda history: estimate_velocity(net, history)


# ---------------------------------------------------------------------------
# Scripted data-collection policies (no training required)
# ---------------------------------------------------------------------------

class HoldPolicy:
    """Commands the nominal standing pose every step."""

    def __init__(self, settings: EnvSettings):
        self.pose = standing_pose(settings.sim.geometry, settings.sim.base_height)

    def act(self, ctx, rng):
        return self.pose.copy(), {"log_prob": 0.0, "weights": None}


class ScriptedGaitPolicy:
    """Open-loop leg swings keyed to the gait phase; enough to generate
    varied proprioception and forward motion for estimator data."""

    def __init__(self, settings: EnvSettings, gait: GaitType = GaitType.TROT,
                 pitch_amplitude: float = 0.28, knee_lift: float = 0.45):
        self.pose = standing_pose(settings.sim.geometry, settings.sim.base_height)
        self.pattern = settings.gait_table.pattern(gait)
        self.pitch_amplitude = pitch_amplitude
        self.knee_lift = knee_lift

    def act(self, ctx, rng):
        action = self.pose.copy()
        for leg, spans in enumerate(self.pattern.intervals):
            start, end = spans[0]
            duty = end - start
            local = ((ctx.phase - start) % 1.0)
            if local < duty:  # stance: sweep the hip backward
                progress = local / duty
                action[3 * leg + 1] += self.pitch_amplitude * (progress - 0.5)
            else:  # swing: bring the leg forward with the knee tucked
                progress = (local - duty) / (1.0 - duty)
                action[3 * leg + 1] -= self.pitch_amplitude * (progress - 0.5)
                action[3 * leg + 2] -= self.knee_lift * math.sin(math.pi * progress)
        return action, {"log_prob": 0.0, "weights": None}


@dataclass
class EstimatorDataset:
    inputs: np.ndarray      # (n, 66)
    targets: np.ndarray     # (n, 3) heading-frame base velocity
    episode_ids: np.ndarray

    def __len__(self) -> int:
        return self.inputs.shape[0]


def pairs_from_trajectory(traj, episode_id: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    states = [s.state for s in traj.steps]
    inputs, targets = [], []
    for k in range(HISTORY - 1, len(states)):
        window = states[k - 2:k + 1]
        inputs.append(build_estimator_input(window))
        targets.append(heading_frame_velocity(states[k]))
    n = len(inputs)
    if n == 0:
        return np.zeros((0, INPUT_DIM)), np.zeros((0, 3)), np.zeros(0, dtype=int)
    return np.stack(inputs), np.stack(targets), np.full(n, episode_id, dtype=int)


def collect_dataset(policies, settings: EnvSettings, episodes: int,
                    rng: RngStream) -> EstimatorDataset:
    """Round-robin episodes over the given policies, recording
    (proprioceptive history, true velocity) pairs."""
    inputs = [np.zeros((0, INPUT_DIM))]
    targets = [np.zeros((0, 3))]
    ids = [np.zeros(0, dtype=int)]
    for episode in range(episodes):
        policy = policies[episode % len(policies)]
        episode_rng = rng.numbered_child(episode)
        spec = EpisodeSpec(mode="single", task=GaitType.TROT)
        traj = run_episode(policy, spec, settings, episode_rng)
        if not traj.valid:
            continue
        x, y, eid = pairs_from_trajectory(traj, episode)
        inputs.append(x)
        targets.append(y)
        ids.append(eid)
    return EstimatorDataset(np.concatenate(inputs), np.concatenate(targets), np.concatenate(ids))


def split_by_episode(dataset: EstimatorDataset, holdout_every: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Boolean (train, validation) masks; every n-th episode held out."""
    unique = np.unique(dataset.episode_ids)
    val_episodes = set(unique[::holdout_every].tolist())
    val_mask = np.isin(dataset.episode_ids, list(val_episodes))
    return ~val_mask, val_mask


def train_estimator(dataset: EstimatorDataset, epochs: int, rng: RngStream,
                    lr: float = 1e-3, weight_decay: float = 5e-4,
                    batch_size: int = 1024, hidden=(256, 256),
                    ) -> tuple[Mlp, list[float]]:
    """Minimize MSE; returns the network and per-epoch held-out MSE."""
    if len(dataset) == 0:
        raise ValueError("estimator training needs a non-empty dataset")
    net = make_estimator_net(rng.child("init"), hidden)
    train_mask, val_mask = split_by_episode(dataset)
    if not np.any(train_mask):
        train_mask = np.ones(len(dataset), dtype=bool)
    x_train, y_train = dataset.inputs[train_mask], dataset.targets[train_mask]
    x_val, y_val = dataset.inputs[val_mask], dataset.targets[val_mask]
    if x_val.shape[0] == 0:
        x_val, y_val = x_train, y_train
    adam = Adam(lr=lr, weight_decay=weight_decay)
    shuffle_rng = rng.child("shuffle")
    curve = []
    for _ in range(epochs):
        order = shuffle_rng.choice(x_train.shape[0], size=x_train.shape[0], replace=False)
        for start in range(0, x_train.shape[0], batch_size):
            idx = order[start:start + batch_size]
            pred, cache = net.forward_cached(x_train[idx])
            grad = (2.0 / (idx.shape[0] * 3)) * (pred - y_train[idx])
            grads, _ = net.backward(cache, grad)
            adam.step(net.parameters(), grads)
        curve.append(validation_mse(net, x_val, y_val))
    return net, curve


def validation_mse(net: Mlp, x: np.ndarray, y: np.ndarray) -> float:
    pred = net.forward(x)
    return float(np.mean((pred - y) ** 2))


def per_axis_mse(net: Mlp, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    pred = net.forward(x)
    return np.mean((pred - y) ** 2, axis=0)
