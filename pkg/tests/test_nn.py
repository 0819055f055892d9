import numpy as np
import pytest

from conftest import LD, assert_gradients_match, fd_gradient, mlp_forward_ld
from multigait.core import RngStream
from multigait.nn import Adam, Mlp, load_checkpoint, save_checkpoint, soft_update

# network shapes used across the project
PROJECT_SHAPES = [
    (23, 256, 256, 24),   # locomotion expert actor
    (21, 256, 256, 24),   # recovery expert actor
    (35, 256, 256, 1),    # critic (obs + action)
    (23, 256, 256, 5),    # gating
    (66, 256, 256, 3),    # velocity estimator
]


class TestForward:
    def test_zero_network(self):
        net = Mlp((3, 4, 2), [np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros(4), np.zeros(2)])
        np.testing.assert_array_equal(net.forward(np.ones(3)), np.zeros(2))

    def test_identity_single_layer(self):
        net = Mlp((3, 3), [np.eye(3)], [np.zeros(3)])
        x = np.array([0.3, -1.2, 4.0])
        np.testing.assert_array_equal(net.forward(x), x)

    def test_hand_computed_two_layer(self):
        w0 = np.array([[1.0, -1.0], [2.0, 0.5]])
        b0 = np.array([0.1, -0.2])
        w1 = np.array([[1.0], [3.0]])
        b1 = np.array([0.5])
        net = Mlp((2, 2, 1), [w0, w1], [b0, b1])
        x = np.array([1.0, 2.0])
        # z0 = [1*1+2*2+0.1, -1+1-0.2] = [5.1, -0.2]; relu -> [5.1, 0]
        # y = 5.1*1 + 0*3 + 0.5 = 5.6
        assert net.forward(x)[0] == pytest.approx(5.6, abs=1e-12)

    def test_dimension_mismatch(self, rng):
        net = Mlp.initialize((4, 8, 2), rng)
        with pytest.raises(ValueError):
            net.forward(np.zeros(5))

    def test_batch_matches_single(self, rng):
        net = Mlp.initialize((5, 16, 3), rng.child("net"))
        xs = rng.child("x").standard_normal((7, 5))
        batch = net.forward(xs)
        for i in range(7):
            np.testing.assert_allclose(batch[i], net.forward(xs[i]), atol=1e-13)

    def test_parameter_count(self, rng):
        net = Mlp.initialize((23, 256, 256, 24), rng)
        assert net.parameter_count() == sum((i + 1) * o for i, o in zip((23, 256, 256), (256, 256, 24)))


class TestGradients:
    def test_constant_loss_zero_gradients(self, rng):
        net = Mlp.initialize((4, 8, 2), rng)
        y, cache = net.forward_cached(rng.standard_normal((3, 4)))
        grads, _ = net.backward(cache, np.zeros_like(y))
        assert all(np.all(g == 0.0) for g in grads)

    def test_doubling_loss_doubles_gradients(self, rng):
        net = Mlp.initialize((4, 8, 2), rng.child("net"))
        x = rng.child("x").standard_normal((3, 4))
        y, cache = net.forward_cached(x)
        g1, _ = net.backward(cache, y)
        y2, cache2 = net.forward_cached(x)
        g2, _ = net.backward(cache2, 2.0 * y2)
        for a, b in zip(g1, g2):
            np.testing.assert_allclose(2.0 * a, b, rtol=1e-12)

    @pytest.mark.parametrize("sizes", [(5, 8, 8, 3), (4, 16, 2)])
    def test_matches_finite_differences(self, rng, sizes):
        net = Mlp.initialize(sizes, rng.child(f"net{sizes}"))
        x = rng.child("x").standard_normal((4, sizes[0]))
        t = rng.child("t").standard_normal((4, sizes[-1]))

        y, cache = net.forward_cached(x)
        analytic, _ = net.backward(cache, 2.0 * (y - t))

        def loss_ld():
            out = mlp_forward_ld(net, x)
            return np.sum((out - t.astype(LD)) ** 2)

        numeric = fd_gradient(loss_ld, net.parameters())
        assert_gradients_match(analytic, numeric)

    def test_input_gradient(self, rng):
        net = Mlp.initialize((5, 8, 3), rng.child("net"))
        x = rng.child("x").standard_normal(5)
        y, cache = net.forward_cached(x)
        _, grad_x = net.backward(cache, np.ones(3))
        eps = 1e-6
        for i in range(5):
            d = np.zeros(5)
            d[i] = eps
            num = (net.forward(x + d).sum() - net.forward(x - d).sum()) / (2 * eps)
            assert abs(grad_x[i] - num) < 1e-5


class TestAdam:
    def test_zero_gradients_no_decay(self):
        p = [np.array([1.0, -2.0])]
        Adam(lr=0.01).step(p, [np.zeros(2)])
        np.testing.assert_array_equal(p[0], [1.0, -2.0])

    def test_first_step_is_signed_lr(self):
        p = [np.array([0.0, 0.0])]
        g = [np.array([0.3, -7.0])]
        Adam(lr=0.001).step(p, g)
        np.testing.assert_allclose(p[0], [-0.001, 0.001], rtol=1e-6)

    def test_decoupled_weight_decay(self):
        p = [np.array([2.0])]
        opt = Adam(lr=0.1, weight_decay=0.01)
        opt.step(p, [np.zeros(1)])
        assert p[0][0] == pytest.approx(2.0 * (1 - 0.1 * 0.01), rel=1e-12)
        opt.step(p, [np.zeros(1)])
        assert p[0][0] == pytest.approx(2.0 * (1 - 0.1 * 0.01) ** 2, rel=1e-12)


class TestSoftUpdate:
    def test_tau_one_copies(self, rng):
        t = [rng.standard_normal(4)]
        s = [rng.standard_normal(4)]
        soft_update(t, s, 1.0)
        np.testing.assert_allclose(t[0], s[0], atol=1e-16)

    def test_tau_zero_keeps(self, rng):
        t = [rng.standard_normal(4)]
        before = t[0].copy()
        soft_update(t, [rng.standard_normal(4)], 0.0)
        np.testing.assert_array_equal(t[0], before)

    def test_small_tau_value(self):
        t = [np.zeros(1)]
        soft_update(t, [np.ones(1)], 0.001)
        assert t[0][0] == pytest.approx(0.001, rel=1e-12)

    def test_contraction_toward_source(self, rng):
        t = [rng.standard_normal(10)]
        s = [rng.standard_normal(10)]
        gap = np.linalg.norm(t[0] - s[0])
        soft_update(t, s, 0.25)
        assert np.linalg.norm(t[0] - s[0]) == pytest.approx(0.75 * gap, rel=1e-12)


class TestCheckpoints:
    def test_round_trip_bit_identical_forward(self, rng, tmp_path):
        net = Mlp.initialize((23, 64, 24), rng.child("net"))
        other = Mlp.initialize((4, 8, 2), rng.child("other"))
        path = tmp_path / "nets.ckpt"
        save_checkpoint(path, {"actor": net, "aux": other}, extras={"note": 7})
        loaded, extras = load_checkpoint(path)
        assert extras == {"note": 7}
        x = rng.child("x").standard_normal(23)
        np.testing.assert_array_equal(loaded["actor"].forward(x), net.forward(x))
        assert loaded["actor"].checksum() == net.checksum()

    def test_save_is_byte_deterministic(self, rng, tmp_path):
        net = Mlp.initialize((6, 8, 2), rng)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(p1, {"n": net})
        save_checkpoint(p2, {"n": net})
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"not a checkpoint")
        with pytest.raises(ValueError):
            load_checkpoint(path)


@pytest.mark.parametrize("sizes", PROJECT_SHAPES)
def test_gradient_check_project_shapes(sizes):
    rng = RngStream(99).child(str(sizes))
    net = Mlp.initialize(sizes, rng.child("net"))
    x = rng.child("x").standard_normal((2, sizes[0]))
    w = rng.child("w").standard_normal(sizes[-1])

    y, cache = net.forward_cached(x)
    analytic, _ = net.backward(cache, np.broadcast_to(w, y.shape).copy())

    def loss_ld():
        return np.sum(mlp_forward_ld(net, x) @ w.astype(LD))

    # check a deterministic subset of coordinates per layer (full FD on a
    # 256x256 net is wasteful); slices cover weights and biases
    params = net.parameters()
    probe_params = [p.reshape(-1)[:6].reshape(-1) if p.ndim == 1 else p[:2, :3] for p in params]
    numeric = fd_gradient(loss_ld, probe_params)
    probe_analytic = [g.reshape(-1)[:6] if g.ndim == 1 else g[:2, :3] for g in analytic]
    assert_gradients_match(probe_analytic, numeric)
