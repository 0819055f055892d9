"""Soft Actor-Critic for the single-skill experts and the gating network.

Twin critics with min-target, soft target updates, and (by default)
auto-tuned entropy temperature.  Training the gating network reuses the
same machinery with the composite policy as the actor; expert parameters
never receive gradients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream
from .env import EnvSettings, EpisodeSpec, run_episode
from .gaits import GaitType
from .nn import Adam, Mlp, soft_update
from .policy import (
    ACTION_DIM,
    CompositeActorHead,
    CompositePolicy,
    ExpertPolicy,
    ExpertSet,
    GatingNetwork,
    GaussianActorHead,
    OBS_COMPOSITE,
    make_expert,
)
from .rewards import Goal, RewardWeights, SwitchCriteria

LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class SacConfig:
    steps_per_epoch: int = 5000
    episode_steps: int = 250
    batch_size: int = 128
    lr: float = 3e-4
    weight_decay: float = 1e-6
    tau: float = 0.001
    gamma_recovery: float = 0.995
    gamma_gaits: float = 0.955
    buffer_capacity: int = 1_000_000
    hidden: tuple[int, ...] = (256, 256)
    temperature_mode: str = "auto"      # "auto" | "fixed"
    temperature: float = 0.2
    target_entropy: float = -float(ACTION_DIM)
    updates_per_step: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.gamma_recovery < 1.0 and 0.0 < self.gamma_gaits < 1.0):
            raise ValueError("discount factors must lie in (0, 1)")
        if self.temperature_mode not in ("auto", "fixed"):
            raise ValueError("temperature_mode must be 'auto' or 'fixed'")

    def gamma(self, task: GaitType | None) -> float:
        return self.gamma_recovery if task == GaitType.RECOVERY else self.gamma_gaits

    def episodes_per_epoch(self) -> int:
        return self.steps_per_epoch // self.episode_steps


@dataclass
class Transition:
    observation: np.ndarray
    action: np.ndarray
    reward: float
    next_observation: np.ndarray
    done: bool


def transitions(traj) -> list[Transition]:
    """Episode steps as transitions; done is set only at the fixed-length
    boundary (a blown-up episode has no terminal flag)."""
    out = []
    for k, step in enumerate(traj.steps):
        if k + 1 < len(traj.steps):
            next_obs = traj.steps[k + 1].observation
            done = False
        else:
            next_obs = traj.final_observation
            done = traj.valid
        out.append(Transition(step.observation, step.action, step.reward, next_obs, done))
    return out


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling (replacement)."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int = ACTION_DIM):
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.actions = np.zeros((self.capacity, action_dim))
        self.rewards = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.dones = np.zeros(self.capacity)
        self.index = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self.index
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = 1.0 if done else 0.0
        self.index = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: RngStream) -> dict[str, np.ndarray]:
        if self.size == 0:
            raise ValueError("replay buffer is empty")
        idx = rng.integers(0, self.size, size=batch_size)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "dones": self.dones[idx],
        }


def _gaussian_log_prob_from_eps(eps: np.ndarray, std: np.ndarray) -> np.ndarray:
    return np.sum(-0.5 * eps * eps - np.log(std) - 0.5 * LOG_2PI, axis=-1)


class SacCore:
    """Networks + one gradient step; generic over the actor head."""

    def __init__(self, actor, obs_dim: int, config: SacConfig, gamma: float,
                 rng: RngStream, joint_lower, joint_upper):
        self.actor = actor
        self.config = config
        self.gamma = gamma
        self.joint_lower = np.asarray(joint_lower, dtype=float)
        self.joint_upper = np.asarray(joint_upper, dtype=float)
        critic_sizes = (obs_dim + ACTION_DIM, *config.hidden, 1)
        self.q1 = Mlp.initialize(critic_sizes, rng.child("q1"))
        self.q2 = Mlp.initialize(critic_sizes, rng.child("q2"))
        self.target1 = self.q1.clone()
        self.target2 = self.q2.clone()
        self.adam_actor = Adam(lr=config.lr, weight_decay=config.weight_decay)
        self.adam_q1 = Adam(lr=config.lr, weight_decay=config.weight_decay)
        self.adam_q2 = Adam(lr=config.lr, weight_decay=config.weight_decay)
        self.log_alpha = np.array([math.log(max(config.temperature, 1e-12))])
        self.adam_alpha = Adam(lr=config.lr)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    def bellman_targets(self, batch: dict[str, np.ndarray], eps: np.ndarray) -> np.ndarray:
        """Entropy-regularized targets from the target critics only."""
        mu2, std2, _ = self.actor.dist_batch(batch["next_obs"])
        a2 = np.clip(mu2 + std2 * eps, self.joint_lower, self.joint_upper)
        logp2 = _gaussian_log_prob_from_eps(eps, std2)
        x2 = np.concatenate([batch["next_obs"], a2], axis=1)
        q_min = np.minimum(self.target1.forward(x2)[:, 0], self.target2.forward(x2)[:, 0])
        return batch["rewards"] + self.gamma * (1.0 - batch["dones"]) * (q_min - self.alpha * logp2)

    def update(self, batch: dict[str, np.ndarray], rng: RngStream) -> dict[str, float]:
        b = batch["obs"].shape[0]
        eps_next = rng.standard_normal((b, ACTION_DIM))
        y = self.bellman_targets(batch, eps_next)

        x = np.concatenate([batch["obs"], batch["actions"]], axis=1)
        losses = {}
        for name, critic, adam in (("q1", self.q1, self.adam_q1), ("q2", self.q2, self.adam_q2)):
            q, cache = critic.forward_cached(x)
            err = q[:, 0] - y
            losses[f"{name}_loss"] = float(np.mean(err * err))
            grads, _ = critic.backward(cache, (2.0 / b) * err[:, None])
            adam.step(critic.parameters(), grads)

        # actor: minimize alpha * log pi - min Q along the reparameterized sample
        mu, std, head_cache = self.actor.dist_batch(batch["obs"])
        eps = rng.standard_normal((b, ACTION_DIM))
        raw = mu + std * eps
        actions = np.clip(raw, self.joint_lower, self.joint_upper)
        clamp_mask = (raw > self.joint_lower) & (raw < self.joint_upper)
        logp = _gaussian_log_prob_from_eps(eps, std)
        xa = np.concatenate([batch["obs"], actions], axis=1)
        q1v, c1 = self.q1.forward_cached(xa)
        q2v, c2 = self.q2.forward_cached(xa)
        q_min = np.minimum(q1v[:, 0], q2v[:, 0])
        losses["actor_loss"] = float(np.mean(self.alpha * logp - q_min))
        use1 = (q1v[:, 0] <= q2v[:, 0])[:, None]
        _, gx1 = self.q1.backward(c1, (-1.0 / b) * use1)
        _, gx2 = self.q2.backward(c2, (-1.0 / b) * (~use1))
        dL_da = (gx1 + gx2)[:, batch["obs"].shape[1]:] * clamp_mask
        grad_mu = dL_da
        grad_std = dL_da * eps - (self.alpha / b) / std
        actor_grads = self.actor.backward(head_cache, grad_mu, grad_std)
        self.adam_actor.step(self.actor.trainable(), actor_grads)

        if self.config.temperature_mode == "auto":
            gap = float(np.mean(logp) + self.config.target_entropy)
            self.adam_alpha.step([self.log_alpha], [np.array([-self.alpha * gap])])

        soft_update(self.target1.parameters(), self.q1.parameters(), self.config.tau)
        soft_update(self.target2.parameters(), self.q2.parameters(), self.config.tau)
        losses["alpha"] = self.alpha
        losses["entropy"] = float(-np.mean(logp))
        return losses

    def all_finite(self) -> bool:
        params = list(self.actor.trainable()) + self.q1.parameters() + self.q2.parameters() \
            + self.target1.parameters() + self.target2.parameters() + [self.log_alpha]
        return all(np.all(np.isfinite(p)) for p in params)


def sac_update(core: SacCore, buffer: ReplayBuffer, rng: RngStream) -> dict[str, float]:
    """One SAC gradient step on a uniform batch."""
    if len(buffer) < core.config.batch_size:
        raise ValueError(f"replay buffer holds {len(buffer)} transitions, "
                         f"need at least {core.config.batch_size}")
    batch = buffer.sample(core.config.batch_size, rng)
    return core.update(batch, rng)


@dataclass
class EpochStats:
    epoch: int
    episodes: int
    invalid_episodes: int
    mean_return: float
    mean_step_reward: float
    term_means: dict[str, float]
    sum_r_g: float = 0.0
    losses: dict[str, float] = field(default_factory=dict)


def _summarize(trajectories, epoch: int) -> EpochStats:
    valid = [t for t in trajectories if t.valid]
    returns = [t.total_reward() for t in valid]
    steps = [s for t in valid for s in t.steps]
    term_means: dict[str, float] = {}
    if steps:
        for name in steps[0].reward_terms:
            term_means[name] = float(np.mean([s.reward_terms[name] for s in steps]))
    sum_r_g = float(sum(s.reward_terms.get("r_g", 0.0) for t in trajectories for s in t.steps))
    return EpochStats(
        epoch=epoch,
        episodes=len(trajectories),
        invalid_episodes=len(trajectories) - len(valid),
        mean_return=float(np.mean(returns)) if returns else 0.0,
        mean_step_reward=float(np.mean([s.reward for s in steps])) if steps else 0.0,
        term_means=term_means,
        sum_r_g=sum_r_g,
    )


def collect_epoch(policy, spec_factory, settings: EnvSettings, buffer: ReplayBuffer,
                  rng: RngStream, n_episodes: int, epoch: int = 0) -> EpochStats:
    """Run fixed-length episodes, pushing every healthy transition.

    spec_factory(episode_index, episode_rng) -> EpisodeSpec lets callers
    vary goals per episode while keeping seeding deterministic.
    """
    trajectories = []
    for i in range(n_episodes):
        episode_rng = rng.numbered_child(i)
        spec = spec_factory(i, episode_rng.child("goal"))
        traj = run_episode(policy, spec, settings, episode_rng)
        trajectories.append(traj)
        for tr in transitions(traj):
            buffer.push(tr.observation, tr.action, tr.reward, tr.next_observation, tr.done)
    return _summarize(trajectories, epoch)


class ExpertTrainer:
    """Epoch loop for one single-skill expert."""

    def __init__(self, task: GaitType, settings: EnvSettings, config: SacConfig,
                 rng: RngStream, weights: RewardWeights | None = None):
        self.task = task
        self.settings = settings
        self.config = config
        self.weights = weights or RewardWeights.preset(task)
        self.rng = rng
        self.expert = make_expert(task, rng.child("actor-init"), config.hidden, settings.gait_table)
        self.core = SacCore(self.expert.actor, self.expert.actor.obs_dim, config,
                            config.gamma(task), rng.child("critic-init"),
                            settings.sim.joint_lower, settings.sim.joint_upper)
        self.buffer = ReplayBuffer(config.buffer_capacity, self.expert.actor.obs_dim)
        self.policy = ExpertPolicy(self.expert, settings.sim.joint_lower, settings.sim.joint_upper)
        self._collect_rng = rng.child("collect")
        self._update_rng = rng.child("update")

    def _spec_factory(self, _index: int, _goal_rng: RngStream) -> EpisodeSpec:
        return EpisodeSpec(mode="single", task=self.task, weights=self.weights,
                           n_steps=self.config.episode_steps)

    def run_epoch(self, epoch: int) -> EpochStats:
        stats = collect_epoch(self.policy, self._spec_factory, self.settings, self.buffer,
                              self._collect_rng.numbered_child(epoch),
                              self.config.episodes_per_epoch(), epoch)
        n_updates = int(round(self.config.episodes_per_epoch() * self.config.episode_steps
                              * self.config.updates_per_step))
        losses: dict[str, float] = {}
        for _ in range(n_updates):
            if len(self.buffer) < self.config.batch_size:
                break
            losses = sac_update(self.core, self.buffer, self._update_rng)
        stats.losses = losses
        if not self.core.all_finite():
            raise RuntimeError(f"non-finite parameters after epoch {epoch}")
        return stats

    def train(self, epochs: int) -> list[EpochStats]:
        return [self.run_epoch(e) for e in range(epochs)]


class GatingTrainer:
    """Epoch loop for the gating network over the frozen expert set."""

    def __init__(self, expert_set: ExpertSet, settings: EnvSettings, config: SacConfig,
                 rng: RngStream, gating: GatingNetwork | None = None):
        self.experts = expert_set
        self.settings = settings
        self.config = config
        self.rng = rng
        self.gating = gating or GatingNetwork.initialize(rng.child("gating-init"), config.hidden)
        head = CompositeActorHead(expert_set, self.gating)
        self.core = SacCore(head, OBS_COMPOSITE, config, config.gamma(None),
                            rng.child("critic-init"),
                            settings.sim.joint_lower, settings.sim.joint_upper)
        self.policy = CompositePolicy(expert_set, self.gating,
                                      settings.sim.joint_lower, settings.sim.joint_upper)
        self._collect_rng = rng.child("collect")
        self._update_rng = rng.child("update")
        self.buffer = ReplayBuffer(config.buffer_capacity, OBS_COMPOSITE)

    def run_epoch(self, criteria: SwitchCriteria, epoch: int) -> EpochStats:
        def spec_factory(_index: int, goal_rng: RngStream) -> EpisodeSpec:
            return EpisodeSpec(mode="multi", goal=Goal.sample(goal_rng), criteria=criteria,
                               n_steps=self.config.episode_steps)

        stats = collect_epoch(self.policy, spec_factory, self.settings, self.buffer,
                              self._collect_rng.numbered_child(epoch),
                              self.config.episodes_per_epoch(), epoch)
        n_updates = int(round(self.config.episodes_per_epoch() * self.config.episode_steps
                              * self.config.updates_per_step))
        losses: dict[str, float] = {}
        for _ in range(n_updates):
            if len(self.buffer) < self.config.batch_size:
                break
            losses = sac_update(self.core, self.buffer, self._update_rng)
        stats.losses = losses
        if not self.core.all_finite():
            raise RuntimeError(f"non-finite parameters after epoch {epoch}")
        return stats

    def train(self, criteria: SwitchCriteria, epochs: int, start_epoch: int = 0) -> list[EpochStats]:
        return [self.run_epoch(criteria, start_epoch + e) for e in range(epochs)]


def train_expert(task: GaitType, settings: EnvSettings, config: SacConfig, rng: RngStream,
                 epochs: int, weights: RewardWeights | None = None,
                 ) -> tuple[ExpertTrainer, list[EpochStats]]:
    trainer = ExpertTrainer(task, settings, config, rng, weights)
    return trainer, trainer.train(epochs)


def train_gating(expert_set: ExpertSet, criteria: SwitchCriteria, settings: EnvSettings,
                 config: SacConfig, rng: RngStream, epochs: int,
                 ) -> tuple[GatingTrainer, list[EpochStats]]:
    trainer = GatingTrainer(expert_set, settings, config, rng)
    return trainer, trainer.train(criteria, epochs)
