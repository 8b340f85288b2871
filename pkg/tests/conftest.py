import numpy as np
import pytest

from nfq_steer.net import LayerSpec, PatternSet, init_network


def central_difference(f, flat, step=1e-5):
    g = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = f()
        flat[i] = orig - step
        down = f()
        flat[i] = orig
        g[i] = (up - down) / (2 * step)
    return g


def reference_loss(flat, sizes, inputs, targets, dtype=np.longdouble):
    """Mean squared error of a sigmoid MLP, written independently of the package.

    Evaluated in extended precision so that finite differences of it are not
    dominated by float64 rounding.
    """
    a = np.asarray(inputs, dtype=dtype)
    flat = np.asarray(flat, dtype=dtype)
    off = 0
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = flat[off:off + n_out * n_in].reshape(n_out, n_in)
        off += n_out * n_in
        b = flat[off:off + n_out]
        off += n_out
        a = 1 / (1 + np.exp(-(a @ w.T + b)))
    return np.mean((a[:, 0] - np.asarray(targets, dtype=dtype)) ** 2)


def extended_central_difference(net, patterns, step=1e-5):
    flat = net.flat.astype(np.longdouble)
    h = np.longdouble(step)
    f = lambda: reference_loss(flat, net.spec.sizes, patterns.inputs, patterns.targets)
    return central_difference(f, flat, h)


def random_patterns(rng, n=10, n_in=4):
    return PatternSet(rng.uniform(-1, 1, (n, n_in)), rng.uniform(0, 1, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def q_net():
    return init_network(LayerSpec((4, 5, 5, 1)), seed=7)
