import numpy as np
import pytest

from a4nt import autograd as ag
from a4nt.autograd import Tape, Tensor
from a4nt.data import Vocabulary


def to_float64(params):
    for p in params:
        p.data = p.data.astype(np.float64)


def numeric_gradients(f, params, h=1e-6):
    """Central finite differences of the scalar f() wrt every param entry."""
    grads = []
    for p in params:
        g = np.zeros_like(p.data, dtype=np.float64)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(f().data)
            flat[i] = orig - h
            down = float(f().data)
            flat[i] = orig
            g.reshape(-1)[i] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def assert_gradients_match(f, params, rtol=1e-4, atol=1e-6, h=1e-6):
    """Backward pass vs central differences, in float64."""
    to_float64(params)
    ag.zero_grads(params)
    with Tape() as tape:
        loss = f()
    ag.backward(tape, loss)
    numeric = numeric_gradients(f, params, h=h)
    for p, num in zip(params, numeric):
        analytic = np.zeros_like(num) if p.grad is None else p.grad
        np.testing.assert_allclose(analytic, num, rtol=rtol, atol=atol)


def rand_param(rng, shape, scale=0.5):
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_vocab():
    return Vocabulary(["the", "cat", "sat", "on", "mat", "dog"])
