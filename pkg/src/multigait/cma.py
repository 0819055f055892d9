"""CMA-ES over the two gait-switch distances (x1, x2).

A compact covariance-matrix-adaptation evolution strategy in dimension 2
with the canonical recombination weights and learning rates.  Candidates
are repaired into the feasible set 0 <= x1 < x2 <= 15 (clamp, swap,
nudge) before evaluation, and the optimizer only ever sees repaired
points.  The outer loop interleaves one generation per block of gating-
training epochs, always training against the best criteria found so far.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RngStream
from .env import EpisodeSpec, run_episode
from .rewards import GOAL_DISTANCE_MAX, Goal, SwitchCriteria

DIMENSION = 2


@dataclass
class CmaConfig:
    population: int = 50
    sigma0: float = 1.0
    warm_start: tuple[float, float] = (2.0, 5.0)
    epochs_per_generation: int = 20
    eval_episodes: int = 2


@dataclass
class CandidateEvaluation:
    candidate: SwitchCriteria
    cost: float
    steps: int
    invalid_episodes: int = 0


def repair(x1: float, x2: float) -> tuple[float, float]:
    """Clamp to [0, 15], swap if out of order, nudge apart if equal."""
    x1 = min(max(float(x1), 0.0), GOAL_DISTANCE_MAX)
    x2 = min(max(float(x2), 0.0), GOAL_DISTANCE_MAX)
    if x1 > x2:
        x1, x2 = x2, x1
    if x1 == x2:
        x2 += 0.01
        if x2 > GOAL_DISTANCE_MAX:
            x2 = GOAL_DISTANCE_MAX
            x1 = GOAL_DISTANCE_MAX - 0.01
    return x1, x2


class CmaEs:
    """Minimizes a cost over repaired switch criteria."""

    def __init__(self, config: CmaConfig, rng: RngStream):
        n = DIMENSION
        lam = config.population
        self.config = config
        self.rng = rng
        self.mean = np.array(config.warm_start, dtype=float)
        self.sigma = float(config.sigma0)
        self.lam = lam
        self.mu = lam // 2
        raw = np.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = raw / raw.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)
        self.cc = (4.0 + self.mueff / n) / (n + 4.0 + 2.0 * self.mueff / n)
        self.cs = (self.mueff + 2.0) / (n + self.mueff + 5.0)
        self.c1 = 2.0 / ((n + 1.3) ** 2 + self.mueff)
        self.cmu = min(1.0 - self.c1,
                       2.0 * (self.mueff - 2.0 + 1.0 / self.mueff) / ((n + 2.0) ** 2 + self.mueff))
        self.damps = 1.0 + 2.0 * max(0.0, math.sqrt((self.mueff - 1.0) / (n + 1.0)) - 1.0) + self.cs
        self.chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.cov = np.eye(n)
        self.generation = 0
        self.best: SwitchCriteria | None = None
        self.best_cost = math.inf
        self._pending: list[SwitchCriteria] | None = None

    def _cov_decomposition(self) -> tuple[np.ndarray, np.ndarray]:
        self.cov = 0.5 * (self.cov + self.cov.T)
        vals, vecs = np.linalg.eigh(self.cov)
        vals = np.maximum(vals, 1e-12)
        self.cov = (vecs * vals) @ vecs.T
        return vals, vecs

    def ask(self) -> list[SwitchCriteria]:
        """Sample and repair a full population."""
        vals, vecs = self._cov_decomposition()
        scale = np.sqrt(vals)
        out = []
        for _ in range(self.lam):
            z = self.rng.standard_normal(DIMENSION)
            x = self.mean + self.sigma * (vecs @ (scale * z))
            out.append(SwitchCriteria(*repair(x[0], x[1])))
        self._pending = out
        return out

    def tell(self, evaluations: list[CandidateEvaluation]) -> None:
        """Standard rank-mu / rank-one update from cost-ranked candidates."""
        if self._pending is None:
            raise RuntimeError("tell() called before ask()")
        if len(evaluations) != self.lam:
            raise ValueError(f"expected {self.lam} evaluations, got {len(evaluations)}")
        costs = np.array([e.cost for e in evaluations])
        points = np.array([e.candidate.as_tuple() for e in evaluations])
        order = np.argsort(costs, kind="stable")
        if costs[order[0]] < self.best_cost:
            self.best_cost = float(costs[order[0]])
            self.best = SwitchCriteria(float(points[order[0]][0]), float(points[order[0]][1]))

        vals, vecs = self._cov_decomposition()
        inv_sqrt = (vecs / np.sqrt(vals)) @ vecs.T
        selected = points[order[: self.mu]]
        old_mean = self.mean.copy()
        self.mean = self.weights @ selected
        y_mean = (self.mean - old_mean) / self.sigma

        self.ps = (1.0 - self.cs) * self.ps \
            + math.sqrt(self.cs * (2.0 - self.cs) * self.mueff) * (inv_sqrt @ y_mean)
        self.generation += 1
        ps_norm = float(np.linalg.norm(self.ps))
        denom = math.sqrt(1.0 - (1.0 - self.cs) ** (2.0 * self.generation))
        hsig = 1.0 if ps_norm / denom / self.chi_n < 1.4 + 2.0 / (DIMENSION + 1.0) else 0.0
        self.pc = (1.0 - self.cc) * self.pc \
            + hsig * math.sqrt(self.cc * (2.0 - self.cc) * self.mueff) * y_mean

        ys = (selected - old_mean) / self.sigma
        rank_mu = (self.weights[:, None] * ys).T @ ys
        self.cov = (1.0 - self.c1 - self.cmu) * self.cov \
            + self.c1 * (np.outer(self.pc, self.pc)
                         + (1.0 - hsig) * self.cc * (2.0 - self.cc) * self.cov) \
            + self.cmu * rank_mu
        self.sigma *= math.exp((self.cs / self.damps) * (ps_norm / self.chi_n - 1.0))
        self._cov_decomposition()  # re-symmetrize and enforce the eigenvalue floor
        self._pending = None


def evaluate_criteria(candidate: SwitchCriteria, policy, settings, episodes: int,
                      generation_rng: RngStream) -> CandidateEvaluation:
    """Cost = sum of -r_g over the budgeted episodes.

    Episode seeds come from generation_rng by index, so every candidate in
    a generation sees the same goals and noise (common random numbers).
    An episode that blows up poisons the cost with NaN; the caller
    substitutes a generation-level penalty.
    """
    if episodes <= 0:
        raise ValueError("criteria evaluation needs a positive episode budget")
    cost = 0.0
    steps = 0
    invalid = 0
    for j in range(episodes):
        episode_rng = generation_rng.numbered_child(j)
        goal = Goal.sample(episode_rng.child("goal"))
        spec = EpisodeSpec(mode="multi", goal=goal, criteria=candidate)
        traj = run_episode(policy, spec, settings, episode_rng)
        steps += len(traj)
        if not traj.valid:
            invalid += 1
            cost = math.nan
        if not math.isnan(cost):
            cost -= sum(s.reward_terms["r_g"] for s in traj.steps)
    return CandidateEvaluation(candidate, cost, steps, invalid)


def _patch_invalid_costs(evaluations: list[CandidateEvaluation]) -> None:
    finite = [abs(e.cost) for e in evaluations if math.isfinite(e.cost)]
    penalty = 10.0 * max(finite) if finite else 1e6
    penalty = max(penalty, 1.0)
    for e in evaluations:
        if not math.isfinite(e.cost):
            e.cost = penalty


@dataclass
class GenerationRecord:
    generation: int
    best_cost: float
    x1: float
    x2: float
    sigma: float = 0.0
    mean_epoch_r_g: float = 0.0


def run_cma(cost_fn, config: CmaConfig, rng: RngStream, generations: int,
            ) -> tuple[CmaEs, list[GenerationRecord]]:
    """Drive ask/evaluate/tell on a plain cost function (no training)."""
    cma = CmaEs(config, rng)
    history = []
    for gen in range(generations):
        candidates = cma.ask()
        evals = [CandidateEvaluation(c, float(cost_fn(c.x1, c.x2)), 0) for c in candidates]
        _patch_invalid_costs(evals)
        cma.tell(evals)
        history.append(GenerationRecord(gen, cma.best_cost, cma.best.x1, cma.best.x2, cma.sigma))
    return cma, history


def interleaved_optimize(gating_trainer, config: CmaConfig, rng: RngStream,
                         generations: int) -> tuple[CmaEs, list[GenerationRecord]]:
    """Alternate gating-training blocks with CMA generations.

    Between generations the trainer runs epochs_per_generation epochs
    against the current best-ever criteria; each generation then evaluates
    the full population on frozen policy snapshots with common random
    numbers.
    """
    cma = CmaEs(config, rng)
    best = SwitchCriteria(*config.warm_start)
    history = []
    eval_rng = rng.child("eval")
    for gen in range(generations):
        stats = gating_trainer.train(best, config.epochs_per_generation,
                                     start_epoch=gen * config.epochs_per_generation)
        candidates = cma.ask()
        gen_rng = eval_rng.numbered_child(gen)
        evals = [
            evaluate_criteria(c, gating_trainer.policy, gating_trainer.settings,
                              config.eval_episodes, gen_rng)
            for c in candidates
        ]
        _patch_invalid_costs(evals)
        cma.tell(evals)
        best = cma.best
        history.append(GenerationRecord(
            gen, cma.best_cost, cma.best.x1, cma.best.x2, cma.sigma,
            float(np.mean([s.sum_r_g for s in stats])) if stats else 0.0,
        ))
    return cma, history
