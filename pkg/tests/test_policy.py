import math

import numpy as np
import pytest

from conftest import LD, assert_gradients_match, fd_gradient, mlp_forward_ld
from multigait.core import RngStream
from multigait.gaits import SKILL_ORDER, GaitType
from multigait.nn import Mlp
from multigait.policy import (
    ACTION_DIM,
    CompositeActorHead,
    ExpertSet,
    GatingNetwork,
    GaussianActionDistribution,
    GaussianActorHead,
    LOG_STD_MAX,
    OBS_COMPOSITE,
    OBS_CORE,
    OBS_GATING,
    OBS_LOCOMOTION,
    compose,
    composite_log_prob_and_gating_gradient,
    composite_observation,
    core_observation,
    expert_slice,
    gating_slice,
    goal_offset,
    make_expert,
    sample_action,
)
from multigait.rewards import Goal
from multigait.sim import SimConfig, reset

LO = np.full(12, -3.0)
HI = np.full(12, 3.0)


def random_dists(rng, n=5):
    return [GaussianActionDistribution(rng.standard_normal(12),
                                       np.exp(rng.uniform(-1.5, 1.0, 12)))
            for _ in range(n)]


def fresh_experts(seed=0, hidden=(16, 16)):
    rng = RngStream(seed)
    return ExpertSet([make_expert(g, rng.child(g.value), hidden) for g in SKILL_ORDER])


class TestCompose:
    def test_one_hot_identity(self, rng):
        dists = random_dists(rng)
        for k in range(5):
            w = np.zeros(5)
            w[k] = 1.0
            out = compose(dists, w)
            np.testing.assert_array_equal(out.mean, dists[k].mean)
            np.testing.assert_array_equal(out.std, dists[k].std)

    def test_equal_weights_hand_case(self):
        d1 = GaussianActionDistribution(np.zeros(12), np.ones(12))
        d2 = GaussianActionDistribution(np.full(12, 2.0), np.ones(12))
        out = compose([d1, d2], [0.5, 0.5])
        np.testing.assert_allclose(out.mean, 1.0, rtol=1e-15)
        np.testing.assert_allclose(out.std, 1.0, rtol=1e-15)

    def test_unit_weights_hand_case(self):
        d1 = GaussianActionDistribution(np.zeros(12), np.ones(12))
        d2 = GaussianActionDistribution(np.full(12, 2.0), np.ones(12))
        out = compose([d1, d2], [1.0, 1.0])
        np.testing.assert_allclose(out.mean, 1.0, rtol=1e-15)
        np.testing.assert_allclose(out.std, 0.5, rtol=1e-15)

    def test_all_zero_weights_rejected(self, rng):
        with pytest.raises(ValueError):
            compose(random_dists(rng), np.zeros(5))

    def test_negative_weight_rejected(self, rng):
        with pytest.raises(ValueError):
            compose(random_dists(rng), [0.5, -0.1, 0.2, 0.2, 0.2])

    def test_permutation_equivariance(self, rng):
        dists = random_dists(rng)
        w = rng.uniform(0.05, 1.0, 5)
        base = compose(dists, w)
        perm = rng.choice(5, size=5, replace=False)
        out = compose([dists[i] for i in perm], w[perm])
        np.testing.assert_allclose(out.mean, base.mean, rtol=1e-12)
        np.testing.assert_allclose(out.std, base.std, rtol=1e-12)

    def test_mean_in_hull(self, rng):
        for _ in range(100):
            dists = random_dists(rng)
            w = rng.uniform(0.0, 1.0, 5)
            w[int(rng.integers(0, 5))] += 0.1
            out = compose(dists, w)
            mus = np.stack([d.mean for d in dists])
            assert np.all(out.mean >= mus.min(axis=0) - 1e-12)
            assert np.all(out.mean <= mus.max(axis=0) + 1e-12)

    def test_precision_adds_with_unit_weights(self, rng):
        for _ in range(20):
            dists = random_dists(rng)
            out = compose(dists, np.ones(5))
            sigmas = np.stack([d.std for d in dists])
            assert np.all(out.std < sigmas.min(axis=0) + 1e-15)

    def test_weight_scaling_law(self, rng):
        for _ in range(20):
            dists = random_dists(rng)
            w = rng.uniform(0.1, 1.0, 5)
            c = float(rng.uniform(0.2, 4.0))
            base = compose(dists, w)
            scaled = compose(dists, c * w)
            np.testing.assert_allclose(scaled.mean, base.mean, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(scaled.std, base.std / c, rtol=1e-12)


class TestObservations:
    def test_core_observation_layout(self):
        state = reset("nominal", config=SimConfig())
        obs = core_observation(state)
        assert obs.shape == (OBS_CORE,)
        np.testing.assert_allclose(obs[:3], [0, 0, -1], atol=1e-12)   # gravity
        np.testing.assert_allclose(obs[3:9], 0.0, atol=1e-12)         # velocities
        np.testing.assert_array_equal(obs[9:], state.joint_pos)

    def test_composite_layout_and_slices(self, rng):
        state = reset("nominal", config=SimConfig())
        offset = np.array([0.3, -0.2])
        obs = composite_observation(core_observation(state), 0.25, offset)
        assert obs.shape == (OBS_COMPOSITE,)
        assert expert_slice(obs, True).shape == (OBS_LOCOMOTION,)
        assert expert_slice(obs, False).shape == (OBS_CORE,)
        g = gating_slice(obs)
        assert g.shape == (OBS_GATING,)
        np.testing.assert_array_equal(g[-2:], offset)
        np.testing.assert_allclose(obs[21:23], [math.sin(math.pi / 2), math.cos(math.pi / 2)], atol=1e-12)

    def test_goal_offset_scaling_and_clamp(self):
        state = reset("nominal", config=SimConfig())
        np.testing.assert_allclose(goal_offset(state, Goal(15.0, 0.0)), [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(goal_offset(state, Goal(7.5, math.pi)), [-0.5, 0.0], atol=1e-9)


class TestGaussianHeads:
    def test_zero_log_std_head_gives_unit_std(self):
        net = Mlp((4, 24), [np.zeros((4, 24))], [np.zeros(24)])
        head = GaussianActorHead(net)
        dist = head.distribution(np.ones(4))
        np.testing.assert_allclose(dist.std, np.ones(12), atol=1e-8)

    def test_log_std_clamped(self):
        bias = np.zeros(24)
        bias[12:] = 10.0
        net = Mlp((4, 24), [np.zeros((4, 24))], [bias])
        dist = GaussianActorHead(net).distribution(np.zeros(4))
        np.testing.assert_allclose(dist.std, math.exp(LOG_STD_MAX), rtol=1e-6)
        assert np.all(dist.std <= math.exp(LOG_STD_MAX))

    def test_deterministic_distribution(self, rng):
        head = GaussianActorHead(Mlp.initialize((6, 16, 24), rng))
        obs = np.linspace(-1, 1, 6)
        d1 = head.distribution(obs)
        d2 = head.distribution(obs)
        np.testing.assert_array_equal(d1.mean, d2.mean)
        np.testing.assert_array_equal(d1.std, d2.std)


class TestSampleAction:
    def test_tiny_sigma_returns_mean(self, rng):
        dist = GaussianActionDistribution(np.linspace(-1, 1, 12), np.full(12, 1e-9))
        action, _ = sample_action(dist, rng, LO, HI)
        np.testing.assert_allclose(action, dist.mean, atol=1e-6)

    def test_empirical_mean_clt_bound(self):
        rng = RngStream(77).child("clt")
        mu = np.linspace(-0.5, 0.5, 12)
        sigma = np.full(12, 0.3)
        dist = GaussianActionDistribution(mu, sigma)
        n = 100_000
        total = np.zeros(12)
        for _ in range(n):
            a, _ = sample_action(dist, rng, LO, HI)
            total += a
        bound = 4.0 * sigma / math.sqrt(n)
        assert np.all(np.abs(total / n - mu) < bound)

    def test_same_seed_same_sample(self):
        dist = GaussianActionDistribution(np.zeros(12), np.ones(12))
        a1, lp1 = sample_action(dist, RngStream(5).child("s"), LO, HI)
        a2, lp2 = sample_action(dist, RngStream(5).child("s"), LO, HI)
        np.testing.assert_array_equal(a1, a2)
        assert lp1 == lp2

    def test_clamped_to_limits(self):
        rng = RngStream(5).child("clamp")
        dist = GaussianActionDistribution(np.zeros(12), np.full(12, 5.0))
        lo, hi = np.full(12, -0.5), np.full(12, 0.5)
        for _ in range(50):
            a, _ = sample_action(dist, rng, lo, hi)
            assert np.all(a >= lo) and np.all(a <= hi)

    def test_deterministic_mode(self):
        dist = GaussianActionDistribution(np.full(12, 4.0), np.ones(12))
        a, _ = sample_action(dist, None, LO, HI, deterministic=True)
        np.testing.assert_array_equal(a, np.full(12, 3.0))

    def test_log_prob_matches_density(self):
        dist = GaussianActionDistribution(np.zeros(12), np.ones(12))
        lp = dist.log_prob(np.zeros(12))
        assert lp == pytest.approx(-0.5 * 12 * math.log(2 * math.pi), rel=1e-12)


class TestGatingNetwork:
    def test_equal_logits_uniform(self):
        net = Mlp((OBS_GATING, 5), [np.zeros((OBS_GATING, 5))], [np.zeros(5)])
        gating = GatingNetwork(net)
        np.testing.assert_allclose(gating.weights(np.ones(OBS_GATING)), 0.2, rtol=1e-12)

    def test_dominant_logit(self):
        bias = np.zeros(5)
        bias[2] = 20.0
        net = Mlp((OBS_GATING, 5), [np.zeros((OBS_GATING, 5))], [bias])
        w = GatingNetwork(net).weights(np.zeros(OBS_GATING))
        assert w[2] > 0.999

    def test_weights_sum_to_one(self):
        rng = RngStream(13)
        gating = GatingNetwork.initialize(rng.child("g"), hidden=(32, 32))
        xs = rng.child("x").standard_normal((10_000, OBS_GATING))
        w, _ = gating.weights_batch(xs)
        assert np.all(w >= 0.0)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)


class TestCompositeGradient:
    @staticmethod
    def bounded_log_std_ld(raw):
        k = LD(10.0)
        sp = lambda x: np.maximum(x, LD(0)) + np.log1p(np.exp(-np.abs(x)))
        return raw - sp(k * (raw - LD(2.0))) / k + sp(k * (LD(-5.0) - raw)) / k

    def composite_logp_ld(self, experts, gating, obs, action):
        logits = mlp_forward_ld(gating.net, np.concatenate([obs[:21], obs[23:25]]))
        z = logits - logits.max()
        e = np.exp(z)
        w = e / e.sum()
        mus, sigmas = [], []
        for ex in experts:
            o = obs[:23] if ex.uses_phase else obs[:21]
            y = mlp_forward_ld(ex.actor.net, o)
            mus.append(y[:12])
            sigmas.append(np.exp(self.bounded_log_std_ld(y[12:])))
        mus, sigmas = np.stack(mus), np.stack(sigmas)
        ratio = w[:, None] / sigmas
        denom = ratio.sum(axis=0)
        std = 1 / denom
        mean = std * (ratio * mus).sum(axis=0)
        zz = (action.astype(LD) - mean) / std
        return np.sum(-0.5 * zz * zz - np.log(std) - LD(0.5) * np.log(LD(2.0) * np.pi))

    def test_one_hot_gating_reduces_to_expert_density(self, rng):
        experts = fresh_experts(3)
        bias = np.zeros(5)
        bias[1] = 40.0  # trot expert dominates
        net = Mlp((OBS_GATING, 5), [np.zeros((OBS_GATING, 5))], [bias])
        gating = GatingNetwork(net)
        obs = rng.standard_normal(OBS_COMPOSITE)
        action = rng.standard_normal(12) * 0.2
        lp, _ = composite_log_prob_and_gating_gradient(experts, gating, obs, action)
        expert = experts.experts[1]
        expected = expert.actor.distribution(expert.observation(obs)).log_prob(action)
        assert lp == pytest.approx(expected, rel=1e-9)

    def test_gradient_matches_finite_differences(self):
        rng = RngStream(17)
        experts = fresh_experts(4)
        gating = GatingNetwork(Mlp.initialize((OBS_GATING, 16, 16, 5), rng.child("g"), final_scale=0.5))
        obs = rng.child("obs").standard_normal(OBS_COMPOSITE)
        action = rng.child("act").standard_normal(12) * 0.3
        _, analytic = composite_log_prob_and_gating_gradient(experts, gating, obs, action)

        numeric = fd_gradient(lambda: self.composite_logp_ld(experts.experts, gating, obs, action),
                              gating.trainable())
        assert_gradients_match(analytic, numeric)

    def test_expert_parameters_receive_no_gradient(self, rng):
        experts = fresh_experts(5)
        gating = GatingNetwork.initialize(rng.child("g"), hidden=(16, 16))
        obs = rng.standard_normal(OBS_COMPOSITE)
        action = rng.standard_normal(12) * 0.1
        checksum = experts.checksum()
        lp0, grads = composite_log_prob_and_gating_gradient(experts, gating, obs, action)
        # gradients exist only for gating parameters, experts untouched
        assert len(grads) == len(gating.trainable())
        assert experts.checksum() == checksum
        # perturbing an expert parameter changes the loss (experts matter)...
        experts.experts[1].actor.net.biases[-1][0] += 0.05
        lp1, _ = composite_log_prob_and_gating_gradient(experts, gating, obs, action)
        assert lp1 != lp0


class TestCompositeHeadBatch:
    def test_batch_matches_single(self, rng):
        experts = fresh_experts(6)
        gating = GatingNetwork.initialize(rng.child("g"), hidden=(16, 16))
        head = CompositeActorHead(experts, gating)
        obs = rng.standard_normal((5, OBS_COMPOSITE))
        mu, std, _ = head.dist_batch(obs)
        for i in range(5):
            dist = head.distribution(obs[i])
            np.testing.assert_allclose(mu[i], dist.mean, atol=1e-12)
            np.testing.assert_allclose(std[i], dist.std, atol=1e-12)

    def test_weights_sum_to_one_in_pipeline(self, rng):
        experts = fresh_experts(7)
        gating = GatingNetwork.initialize(rng.child("g"), hidden=(16, 16))
        head = CompositeActorHead(experts, gating)
        for _ in range(100):
            w = head.weights_single(rng.standard_normal(OBS_COMPOSITE))
            assert w.sum() == pytest.approx(1.0, abs=1e-12)


class TestExpertBundle:
    def test_save_load_round_trip(self, tmp_path, rng):
        experts = fresh_experts(9)
        experts.save(tmp_path / "bundle")
        loaded = ExpertSet.load(tmp_path / "bundle")
        assert loaded.checksum() == experts.checksum()
        assert [e.gait for e in loaded] == list(SKILL_ORDER)
        assert loaded.experts[0].uses_phase is False
        assert all(e.uses_phase for e in loaded.experts[1:])
        assert loaded.experts[1].frequency == 2.0
        assert loaded.experts[4].frequency == 3.0

    def test_incomplete_bundle_rejected(self, tmp_path):
        experts = fresh_experts(9)
        experts.save(tmp_path / "bundle")
        (tmp_path / "bundle" / "pace.ckpt").unlink()
        import json

        manifest = json.loads((tmp_path / "bundle" / "manifest.json").read_text())
        manifest["skills"] = [s for s in manifest["skills"] if s["name"] != "pace"]
        (tmp_path / "bundle" / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValueError):
            ExpertSet.load(tmp_path / "bundle")

    def test_wrong_order_rejected(self):
        experts = fresh_experts(9)
        with pytest.raises(ValueError):
            ExpertSet(list(reversed(experts.experts)))
