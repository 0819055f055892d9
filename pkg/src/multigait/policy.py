"""Gaussian policy heads, the gating network, and the multiplicative
composite policy.

Composition of n Gaussian experts with non-negative weights w_i gives
another Gaussian, per action dimension j:

    sigma*_j = ( sum_i w_i / sigma_ij )^-1
    mu*_j    = sigma*_j * sum_i (w_i / sigma_ij) mu_ij

Only the gating network receives gradients; expert parameters stay frozen
after loading.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .core import RngStream, gravity_in_base, quat_rotate_inv, quat_yaw, world_to_heading
from .gaits import SKILL_ORDER, GaitTable, GaitType, phase_encoding
from .nn import Mlp
from .rewards import GOAL_DISTANCE_MAX, Goal
from .sim import RobotState

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
ACTION_DIM = 12

OBS_CORE = 21          # gravity 3 + angular velocity 3 + heading-frame velocity 3 + joints 12
OBS_LOCOMOTION = 23    # core + (sin, cos) phase
OBS_GATING = 23        # core + normalized goal offset
OBS_COMPOSITE = 25     # core + phase + goal offset

N_EXPERTS = len(SKILL_ORDER)

LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# Observations
# ---------------------------------------------------------------------------

def heading_frame_velocity(state: RobotState) -> np.ndarray:
    return world_to_heading(state.base_lin_vel, quat_yaw(state.base_orientation))


def core_observation(state: RobotState, velocity_hf: np.ndarray | None = None) -> np.ndarray:
    """Gravity vector, body-frame angular velocity, heading-frame linear
    velocity (optionally an estimate), joint positions."""
    gravity = gravity_in_base(state.base_orientation)
    ang_body = quat_rotate_inv(state.base_orientation, state.base_ang_vel)
    vel = heading_frame_velocity(state) if velocity_hf is None else np.asarray(velocity_hf, dtype=float)
    return np.concatenate([gravity, ang_body, vel, state.joint_pos])


def goal_offset(state: RobotState, goal: Goal) -> np.ndarray:
    """Robot-to-goal vector in the heading frame, scaled by the sampling
    bound and clamped to [-1, 1] per component."""
    delta = goal.position - state.base_position[:2]
    yaw = quat_yaw(state.base_orientation)
    local = world_to_heading(np.array([delta[0], delta[1], 0.0]), yaw)
    return np.clip(local[:2] / GOAL_DISTANCE_MAX, -1.0, 1.0)


def composite_observation(core: np.ndarray, phase: float, offset: np.ndarray) -> np.ndarray:
    """core + phase encoding + goal offset; experts and the gating network
    each read their slice of this layout."""
    sin_p, cos_p = phase_encoding(phase)
    return np.concatenate([core, [sin_p, cos_p], offset])


def expert_slice(obs_composite: np.ndarray, uses_phase: bool) -> np.ndarray:
    obs_composite = np.asarray(obs_composite)
    n = OBS_LOCOMOTION if uses_phase else OBS_CORE
    return obs_composite[..., :n]


def gating_slice(obs_composite: np.ndarray) -> np.ndarray:
    obs_composite = np.asarray(obs_composite)
    return np.concatenate([obs_composite[..., :OBS_CORE], obs_composite[..., OBS_COMPOSITE - 2:]], axis=-1)


# ---------------------------------------------------------------------------
# Gaussian action distributions
# ---------------------------------------------------------------------------

@dataclass
class GaussianActionDistribution:
    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.std = np.asarray(self.std, dtype=float)
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have the same shape")
        if np.any(self.std <= 0.0):
            raise ValueError("std must be positive")

    def log_prob(self, action) -> float:
        z = (np.asarray(action, dtype=float) - self.mean) / self.std
        return float(np.sum(-0.5 * z * z - np.log(self.std) - 0.5 * LOG_2PI))


def sample_action(dist: GaussianActionDistribution, rng: RngStream | None,
                  joint_lower, joint_upper, deterministic: bool = False) -> tuple[np.ndarray, float]:
    """Per-dimension draw clamped to the joint limits; log-prob pre-clamp."""
    if deterministic or rng is None:
        action = np.clip(dist.mean, joint_lower, joint_upper)
        return action, dist.log_prob(dist.mean)
    eps = rng.standard_normal(dist.mean.shape)
    raw = dist.mean + dist.std * eps
    log_prob = float(np.sum(-0.5 * eps * eps - np.log(dist.std) - 0.5 * LOG_2PI))
    return np.clip(raw, joint_lower, joint_upper), log_prob


def compose(distributions: list[GaussianActionDistribution], weights) -> GaussianActionDistribution:
    """Multiplicative composition of Gaussian experts (weights >= 0, not all zero)."""
    w = np.asarray(weights, dtype=float)
    if len(distributions) != w.shape[0]:
        raise ValueError("one weight per expert distribution required")
    if np.any(w < 0.0):
        raise ValueError("composition weights must be non-negative")
    positive = np.flatnonzero(w > 0.0)
    if positive.size == 0:
        raise ValueError("at least one composition weight must be positive")
    if positive.size == 1:
        # single active expert: the product reduces to that expert exactly
        k = int(positive[0])
        return GaussianActionDistribution(distributions[k].mean.copy(), distributions[k].std.copy())
    mus = np.stack([d.mean for d in distributions])      # (n, 12)
    sigmas = np.stack([d.std for d in distributions])    # (n, 12)
    ratio = w[:, None] / sigmas
    denom = ratio.sum(axis=0)
    std = 1.0 / denom
    mean = std * (ratio * mus).sum(axis=0)
    return GaussianActionDistribution(mean, std)


# ---------------------------------------------------------------------------
# Actor heads
# ---------------------------------------------------------------------------

LOG_STD_KNEE = 10.0  # sharpness of the saturating log-std bounds


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def bounded_log_std(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map the raw head output into (LOG_STD_MIN, LOG_STD_MAX).

    Identity near zero, smooth saturation at the bounds; unlike a hard
    clip the derivative never vanishes, so an actor pushed onto a bound
    can always come back.  Returns (log_std, d log_std / d raw).
    """
    k = LOG_STD_KNEE
    hi = raw - LOG_STD_MAX
    lo = LOG_STD_MIN - raw
    log_std = raw - _softplus(k * hi) / k + _softplus(k * lo) / k
    deriv = 1.0 - _sigmoid(k * hi) - _sigmoid(k * lo)
    return log_std, deriv


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def split_actor_output(y: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, std, d log_std / d raw) from the raw 24-dim actor output."""
    mu = y[..., :ACTION_DIM]
    raw = y[..., ACTION_DIM:]
    log_std, deriv = bounded_log_std(raw)
    return mu, np.exp(log_std), deriv


class GaussianActorHead:
    """MLP producing 12 means and 12 clamped log-stds."""

    def __init__(self, net: Mlp):
        if net.sizes[-1] != 2 * ACTION_DIM:
            raise ValueError("actor network must output 24 values")
        self.net = net

    @property
    def obs_dim(self) -> int:
        return self.net.sizes[0]

    def trainable(self) -> list[np.ndarray]:
        return self.net.parameters()

    def distribution(self, obs) -> GaussianActionDistribution:
        mu, std, _ = split_actor_output(self.net.forward(obs))
        return GaussianActionDistribution(mu, std)

    def dist_batch(self, obs) -> tuple[np.ndarray, np.ndarray, object]:
        y, net_cache = self.net.forward_cached(obs)
        mu, std, log_std_deriv = split_actor_output(y)
        return mu, std, (net_cache, std, log_std_deriv)

    def backward(self, cache, grad_mu, grad_std) -> list[np.ndarray]:
        net_cache, std, log_std_deriv = cache
        grad_y = np.concatenate([grad_mu, grad_std * std * log_std_deriv], axis=-1)
        grads, _ = self.net.backward(net_cache, grad_y)
        return grads


class GatingNetwork:
    """MLP over (core observation, goal offset) producing 5 softmax weights."""

    def __init__(self, net: Mlp):
        if net.sizes[-1] != N_EXPERTS:
            raise ValueError(f"gating network must output {N_EXPERTS} logits")
        self.net = net

    @classmethod
    def initialize(cls, rng: RngStream, hidden=(256, 256)) -> "GatingNetwork":
        sizes = (OBS_GATING, *hidden, N_EXPERTS)
        return cls(Mlp.initialize(sizes, rng, final_scale=0.01))

    def trainable(self) -> list[np.ndarray]:
        return self.net.parameters()

    def weights(self, obs) -> np.ndarray:
        return _softmax(self.net.forward(obs))

    def weights_batch(self, obs) -> tuple[np.ndarray, object]:
        logits, cache = self.net.forward_cached(obs)
        return _softmax(logits), cache

    def backward(self, cache, weights, grad_w) -> list[np.ndarray]:
        inner = (grad_w * weights).sum(axis=-1, keepdims=True)
        grad_logits = weights * (grad_w - inner)
        grads, _ = self.net.backward(cache, grad_logits)
        return grads


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def gating_weights(gating: GatingNetwork, core_obs, offset) -> np.ndarray:
    return gating.weights(np.concatenate([np.asarray(core_obs, dtype=float), np.asarray(offset, dtype=float)]))


# ---------------------------------------------------------------------------
# Expert bundle
# ---------------------------------------------------------------------------

@dataclass
class Expert:
    name: str
    gait: GaitType
    actor: GaussianActorHead
    uses_phase: bool
    frequency: float

    def observation(self, obs_composite: np.ndarray) -> np.ndarray:
        return expert_slice(obs_composite, self.uses_phase)


class ExpertSet:
    """The five frozen skill primitives, in SKILL_ORDER."""

    def __init__(self, experts: list[Expert]):
        if [e.gait for e in experts] != list(SKILL_ORDER):
            raise ValueError(f"experts must be ordered {[g.value for g in SKILL_ORDER]}")
        self.experts = experts

    def __iter__(self):
        return iter(self.experts)

    def __len__(self) -> int:
        return len(self.experts)

    def checksum(self) -> str:
        import hashlib

        h = hashlib.sha256()
        for e in self.experts:
            h.update(e.actor.net.checksum().encode())
        return h.hexdigest()

    def distributions(self, obs_composite) -> list[GaussianActionDistribution]:
        return [e.actor.distribution(e.observation(obs_composite)) for e in self.experts]

    def save(self, directory: str) -> None:
        from .nn import save_checkpoint

        os.makedirs(directory, exist_ok=True)
        manifest = {"version": 1, "skills": []}
        for e in self.experts:
            filename = f"{e.name}.ckpt"
            save_checkpoint(os.path.join(directory, filename), {"actor": e.actor.net},
                            extras={"gait": e.gait.value, "uses_phase": e.uses_phase,
                                    "frequency": e.frequency, "obs_dim": e.actor.obs_dim})
            manifest["skills"].append({
                "name": e.name, "file": filename, "gait": e.gait.value,
                "uses_phase": e.uses_phase, "frequency": e.frequency,
                "obs_dim": e.actor.obs_dim,
            })
        with open(os.path.join(directory, "manifest.json"), "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, directory: str) -> "ExpertSet":
        from .nn import load_checkpoint

        with open(os.path.join(directory, "manifest.json")) as f:
            manifest = json.load(f)
        by_gait = {}
        for entry in manifest["skills"]:
            nets, extras = load_checkpoint(os.path.join(directory, entry["file"]))
            expert = Expert(
                name=entry["name"],
                gait=GaitType(entry["gait"]),
                actor=GaussianActorHead(nets["actor"]),
                uses_phase=bool(entry["uses_phase"]),
                frequency=float(entry["frequency"]),
            )
            by_gait[expert.gait] = expert
        missing = [g.value for g in SKILL_ORDER if g not in by_gait]
        if missing:
            raise ValueError(f"expert bundle is missing skills: {missing}")
        return cls([by_gait[g] for g in SKILL_ORDER])


def make_expert(task: GaitType, rng: RngStream, hidden=(256, 256),
                gait_table: GaitTable | None = None, log_std_init: float = -0.5) -> Expert:
    """Freshly initialized expert for a task (random policy until trained).

    The mean head starts near zero; the log-std head starts at
    log_std_init so early exploration noise stays inside the joint range.
    """
    uses_phase = task != GaitType.RECOVERY
    obs_dim = OBS_LOCOMOTION if uses_phase else OBS_CORE
    net = Mlp.initialize((obs_dim, *hidden, 2 * ACTION_DIM), rng, final_scale=0.01)
    net.biases[-1][ACTION_DIM:] += log_std_init
    table = gait_table or GaitTable()
    freq = table.frequency(task)
    return Expert(task.value, task, GaussianActorHead(net), uses_phase, freq)


# ---------------------------------------------------------------------------
# Composite head (training-time batch math, gradients into gating only)
# ---------------------------------------------------------------------------

class CompositeActorHead:
    """Composite Gaussian policy over a frozen expert set.

    Consumes the 25-dim composite observation; exposes the same batch
    interface as GaussianActorHead but routes gradients exclusively into
    the gating network parameters.
    """

    def __init__(self, expert_set: ExpertSet, gating: GatingNetwork):
        self.experts = expert_set
        self.gating = gating

    @property
    def obs_dim(self) -> int:
        return OBS_COMPOSITE

    def trainable(self) -> list[np.ndarray]:
        return self.gating.trainable()

    def weights_single(self, obs_composite) -> np.ndarray:
        return self.gating.weights(gating_slice(obs_composite))

    def distribution(self, obs_composite) -> GaussianActionDistribution:
        w = self.weights_single(obs_composite)
        return compose(self.experts.distributions(obs_composite), w)

    def dist_batch(self, obs) -> tuple[np.ndarray, np.ndarray, object]:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        w, gating_cache = self.gating.weights_batch(gating_slice(obs))
        mus, sigmas = [], []
        for e in self.experts:
            y = e.actor.net.forward(e.observation(obs))
            mu_i, std_i, _ = split_actor_output(y)
            mus.append(mu_i)
            sigmas.append(std_i)
        mus = np.stack(mus)          # (n, B, 12)
        sigmas = np.stack(sigmas)    # (n, B, 12)
        ratio = w.T[:, :, None] / sigmas               # (n, B, 12)
        denom = ratio.sum(axis=0)                      # (B, 12)
        std = 1.0 / denom
        mean = std * (ratio * mus).sum(axis=0)
        cache = (gating_cache, w, mus, sigmas, mean, std)
        return mean, std, cache

    def backward(self, cache, grad_mu, grad_std) -> list[np.ndarray]:
        gating_cache, w, mus, sigmas, mean, std = cache
        # d mu*_j / d w_i = sigma*_j (mu_ij - mu*_j) / sigma_ij
        # d sigma*_j / d w_i = -sigma*_j^2 / sigma_ij
        dmu_dw = std[None] * (mus - mean[None]) / sigmas      # (n, B, 12)
        dstd_dw = -(std[None] ** 2) / sigmas                   # (n, B, 12)
        grad_w = (grad_mu[None] * dmu_dw + grad_std[None] * dstd_dw).sum(axis=2).T  # (B, n)
        return self.gating.backward(gating_cache, w, grad_w)


def composite_log_prob_and_gating_gradient(expert_set: ExpertSet, gating: GatingNetwork,
                                           obs_composite, action) -> tuple[float, list[np.ndarray]]:
    """Log-density of the composite policy at an action, and its gradient
    with respect to the gating parameters only."""
    head = CompositeActorHead(expert_set, gating)
    obs = np.atleast_2d(np.asarray(obs_composite, dtype=float))
    action = np.asarray(action, dtype=float).reshape(1, ACTION_DIM)
    mean, std, cache = head.dist_batch(obs)
    z = (action - mean) / std
    log_prob = float(np.sum(-0.5 * z * z - np.log(std) - 0.5 * LOG_2PI))
    grad_mu = z / std
    grad_std = (z * z - 1.0) / std
    grads = head.backward(cache, grad_mu, grad_std)
    return log_prob, grads


# ---------------------------------------------------------------------------
# Rollout-time policies
# ---------------------------------------------------------------------------

@dataclass
class StepContext:
    """Everything a policy may look at when choosing an action."""

    state: RobotState
    phase: float
    velocity_hf: np.ndarray
    goal: Goal | None = None
    distance: float | None = None
    offset: np.ndarray | None = None

    def core(self) -> np.ndarray:
        return core_observation(self.state, self.velocity_hf)

    def composite(self) -> np.ndarray:
        if self.offset is None:
            raise ValueError("composite observation requires a goal")
        return composite_observation(self.core(), self.phase, self.offset)


class ExpertPolicy:
    """Rolls out a single skill primitive."""

    def __init__(self, expert: Expert, joint_lower, joint_upper, deterministic: bool = False):
        self.expert = expert
        self.joint_lower = joint_lower
        self.joint_upper = joint_upper
        self.deterministic = deterministic

    def observe(self, ctx: StepContext) -> np.ndarray:
        core = ctx.core()
        if not self.expert.uses_phase:
            return core
        sin_p, cos_p = phase_encoding(ctx.phase)
        return np.concatenate([core, [sin_p, cos_p]])

    def act(self, ctx: StepContext, rng: RngStream | None) -> tuple[np.ndarray, dict]:
        dist = self.expert.actor.distribution(self.observe(ctx))
        action, log_prob = sample_action(dist, rng, self.joint_lower, self.joint_upper, self.deterministic)
        return action, {"log_prob": log_prob, "weights": None}


class CompositePolicy:
    """Gating-weighted multiplicative composition of the expert set."""

    def __init__(self, expert_set: ExpertSet, gating: GatingNetwork,
                 joint_lower, joint_upper, deterministic: bool = False):
        self.head = CompositeActorHead(expert_set, gating)
        self.joint_lower = joint_lower
        self.joint_upper = joint_upper
        self.deterministic = deterministic

    def act(self, ctx: StepContext, rng: RngStream | None) -> tuple[np.ndarray, dict]:
        obs = ctx.composite()
        w = self.head.weights_single(obs)
        dist = compose(self.head.experts.distributions(obs), w)
        action, log_prob = sample_action(dist, rng, self.joint_lower, self.joint_upper, self.deterministic)
        return action, {"log_prob": log_prob, "weights": w}


class ManualSwitchPolicy:
    """Hard switching between gait experts by the same distance thresholds
    (the discrete-switch baseline)."""

    def __init__(self, expert_set: ExpertSet, criteria, joint_lower, joint_upper,
                 deterministic: bool = False):
        self.experts = expert_set
        self.criteria = criteria
        self.joint_lower = joint_lower
        self.joint_upper = joint_upper
        self.deterministic = deterministic

    def act(self, ctx: StepContext, rng: RngStream | None) -> tuple[np.ndarray, dict]:
        from .rewards import select_reference_gait

        if ctx.distance is None:
            raise ValueError("manual-switch policy requires a goal")
        gait = select_reference_gait(ctx.distance, self.criteria)
        index = SKILL_ORDER.index(gait)
        expert = self.experts.experts[index]
        policy = ExpertPolicy(expert, self.joint_lower, self.joint_upper, self.deterministic)
        action, info = policy.act(ctx, rng)
        weights = np.zeros(N_EXPERTS)
        weights[index] = 1.0
        info["weights"] = weights
        return action, info
