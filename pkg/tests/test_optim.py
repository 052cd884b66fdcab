"""Optimizer steps against closed-form expectations."""

import numpy as np
import pytest

from regionfill.nn import Parameter
from regionfill.optim import SGD, Adam
from regionfill.tensor import Tensor


def test_sgd_step_closed_form():
    p = Parameter(np.array([1.0, 2.0, 3.0]))
    p.grad = np.array([0.5, -1.0, 0.0], dtype=np.float32)
    SGD([p], lr=0.1).step()
    np.testing.assert_allclose(p.data, [0.95, 2.1, 3.0], atol=1e-7)


def test_adam_first_step_is_lr_sized():
    # with bias correction the first update is lr * sign(grad) up to eps
    p = Parameter(np.zeros(3))
    p.grad = np.array([10.0, -0.01, 0.0], dtype=np.float32)
    Adam([p], lr=1e-3).step()
    np.testing.assert_allclose(p.data[:2], [-1e-3, 1e-3], rtol=1e-3)
    assert p.data[2] == 0.0


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(0)
    p = Parameter(rng.normal(size=4))
    opt = Adam([p], lr=0.01, betas=(0.5, 0.9), eps=1e-8)
    ref = p.data.astype(np.float64).copy()
    m = np.zeros(4)
    v = np.zeros(4)
    for t in range(1, 6):
        g = rng.normal(size=4).astype(np.float32)
        p.grad = g.copy()
        opt.step()
        m = 0.5 * m + 0.5 * g
        v = 0.9 * v + 0.1 * g * g
        ref -= 0.01 * (m / (1 - 0.5**t)) / (np.sqrt(v / (1 - 0.9**t)) + 1e-8)
        np.testing.assert_allclose(p.data, ref, atol=1e-5)


def test_adam_converges_on_quadratic():
    target = Tensor(np.array([1.0, -2.0, 3.0]))
    p = Parameter(np.zeros(3))
    opt = Adam([p], lr=0.1, betas=(0.5, 0.999))
    for _ in range(100):
        opt.zero_grad()
        ((p - target) ** 2.0).sum().backward()
        opt.step()
    np.testing.assert_allclose(p.data, target.data, atol=1e-2)


def test_step_bumps_parameter_version():
    p = Parameter(np.ones(2))
    assert p.version == 0
    p.grad = np.ones(2, dtype=np.float32)
    opt = Adam([p], lr=0.1)
    opt.step()
    assert p.version == 1
    opt.step()
    assert p.version == 2


def test_none_grad_leaves_param_untouched():
    p = Parameter(np.ones(2))
    before = p.data.copy()
    Adam([p], lr=0.5).step()
    SGD([p], lr=0.5).step()
    np.testing.assert_array_equal(p.data, before)
