import numpy as np
import pytest

from multigait.core import RngStream

LD = np.longdouble


def mlp_forward_ld(net, x):
    """Extended-precision forward pass, independent of the library path."""
    h = np.asarray(x, dtype=LD)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.astype(LD) + b.astype(LD)
        if i < len(net.weights) - 1:
            h = np.maximum(h, LD(0))
    return h


def fd_gradient(scalar_fn, params, eps=1e-5):
    """Central finite differences of scalar_fn() w.r.t. the given float64
    parameter arrays (perturbed in place).  scalar_fn should evaluate in
    extended precision so cancellation noise stays below tolerance."""
    flat = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + eps
            hi = scalar_fn()
            p[idx] = orig - eps
            lo = scalar_fn()
            p[idx] = orig
            g[idx] = float((hi - lo) / LD(2 * eps))
        flat.append(g)
    return flat


def assert_gradients_match(analytic, numeric, threshold=1e-8, rtol=1e-4):
    a = np.concatenate([np.asarray(g).ravel() for g in analytic])
    n = np.concatenate([np.asarray(g).ravel() for g in numeric])
    mask = np.abs(a) > threshold
    assert mask.any(), "no gradient coordinates above the check threshold"
    rel = np.abs(a[mask] - n[mask]) / np.maximum(np.abs(n[mask]), 1e-12)
    assert rel.max() < rtol, f"max relative gradient error {rel.max():.3e}"


@pytest.fixture
def rng():
    return RngStream(1234)
