"""Episode orchestration: wires the simulator, reward engine, and a policy
into fixed-length 25 Hz episodes with full trajectory recording."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import RngStream
from .gaits import GaitTable, GaitType
from .policy import StepContext, goal_offset, heading_frame_velocity
from .rewards import (
    Goal,
    RewardWeights,
    SwitchCriteria,
    TaskReferences,
    multi_skill_reward,
    select_reference_gait,
    single_skill_reward,
)
from .sim import (
    CONTROL_DT,
    EPISODE_STEPS,
    RobotState,
    SimConfig,
    SimulationError,
    Trajectory,
    TrajectoryStep,
    control_step,
    reset,
)


@dataclass
class EnvSettings:
    sim: SimConfig = field(default_factory=SimConfig)
    refs: TaskReferences = field(default_factory=TaskReferences)
    gait_table: GaitTable = field(default_factory=GaitTable)


@dataclass
class EpisodeSpec:
    """What to run: a single-skill task or goal-tracking with criteria."""

    mode: str                                  # "single" | "multi"
    task: GaitType | None = None
    weights: RewardWeights | None = None       # single mode only; defaults to the task preset
    goal: Goal | None = None
    criteria: SwitchCriteria | None = None
    reset_mode: str | None = None
    n_steps: int = EPISODE_STEPS

    def __post_init__(self):
        if self.mode == "single":
            if self.task is None:
                raise ValueError("single mode needs a task")
            if self.weights is None:
                self.weights = RewardWeights.preset(self.task)
            if self.reset_mode is None:
                self.reset_mode = "random_fall" if self.task == GaitType.RECOVERY else "nominal"
        elif self.mode == "multi":
            if self.goal is None or self.criteria is None:
                raise ValueError("multi mode needs a goal and switch criteria")
            if self.reset_mode is None:
                self.reset_mode = "nominal"
        else:
            raise ValueError(f"unknown episode mode {self.mode!r}")


def _observation_for(spec: EpisodeSpec, ctx: StepContext) -> np.ndarray:
    if spec.mode == "multi":
        return ctx.composite()
    core = ctx.core()
    if spec.task == GaitType.RECOVERY:
        return core
    from .gaits import phase_encoding

    sin_p, cos_p = phase_encoding(ctx.phase)
    return np.concatenate([core, [sin_p, cos_p]])


def _make_context(state: RobotState, spec: EpisodeSpec,
                  velocity_fn, history: list[RobotState]) -> StepContext:
    if velocity_fn is None:
        velocity = heading_frame_velocity(state)
    else:
        velocity = np.asarray(velocity_fn(history), dtype=float)
    ctx = StepContext(state=state, phase=state.phase, velocity_hf=velocity)
    if spec.mode == "multi":
        ctx.goal = spec.goal
        ctx.distance = float(np.linalg.norm(spec.goal.position - state.base_position[:2]))
        ctx.offset = goal_offset(state, spec.goal)
    return ctx


def run_episode(policy, spec: EpisodeSpec, settings: EnvSettings, rng: RngStream,
                velocity_fn=None) -> Trajectory:
    """Fixed-goal, fixed-length episode with no early termination.

    A simulation blow-up returns the partial trajectory flagged invalid
    instead of raising.  velocity_fn, when given, maps the rolling 3-state
    history to the heading-frame velocity the policy observes (the
    deployment-style estimator probe).
    """
    state = reset(spec.reset_mode, rng.child("reset"), settings.sim)
    act_rng = rng.child("actions")
    traj = Trajectory(goal=tuple(spec.goal.position) if spec.goal else None)
    traj.initial_state = state
    history = [state, state, state]

    for k in range(spec.n_steps):
        ctx = _make_context(state, spec, velocity_fn, history)
        if spec.mode == "multi":
            ref_gait = select_reference_gait(ctx.distance, spec.criteria)
            frequency = settings.gait_table.frequency(ref_gait)
        else:
            ref_gait = spec.task
            frequency = settings.gait_table.frequency(spec.task)
        observation = _observation_for(spec, ctx)
        action, info = policy.act(ctx, act_rng)
        try:
            next_state, _ = control_step(state, action, settings.sim, frequency)
        except SimulationError as err:
            traj.valid = False
            traj.failure = str(err)
            break
        if spec.mode == "multi":
            reward, terms = multi_skill_reward(next_state, spec.goal, spec.criteria,
                                               settings.refs, settings.gait_table)
        else:
            reward, terms = single_skill_reward(next_state, spec.task, settings.refs,
                                                spec.weights, settings.gait_table)
        traj.steps.append(TrajectoryStep(
            time=k * CONTROL_DT,
            state=next_state,
            action=action,
            reward=reward,
            reward_terms=terms,
            expert_weights=info.get("weights"),
            ref_gait=ref_gait.value,
            observation=observation,
            log_prob=info.get("log_prob"),
        ))
        state = next_state
        history = [history[1], history[2], state]

    final_ctx = _make_context(state, spec, velocity_fn, history)
    traj.final_observation = _observation_for(spec, final_ctx)
    return traj

