"""Tests for the adaptive-moment optimizer and the warm-up schedule."""

import numpy as np
import pytest
from pydantic import ValidationError

from autodiff import Tensor
from config.schemas import OptimizerConfig
from services.optimizer_service import Moments, collect_grads, optimizer_step, warmup_lr
from utils.errors import ContractError, FrozenTensorError


def test_first_two_steps_match_hand_values():
    config = OptimizerConfig(lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
    params = {'w': Tensor(np.array([1.0]), requires_grad=True)}
    moments = {}

    optimizer_step(params, moments, {'w': np.array([0.5])}, config)
    # bias-corrected m_hat / sqrt(v_hat) is exactly sign(g) on the first step
    assert params['w'].data[0] == pytest.approx(0.9, abs=1e-7)
    assert moments['w'].t == 1

    optimizer_step(params, moments, {'w': np.array([-0.5])}, config)
    after_first = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8)
    m_hat = (0.9 * 0.05 - 0.05) / (1 - 0.9 ** 2)
    v_hat = (0.999 * 0.00025 + 0.001 * 0.25) / (1 - 0.999 ** 2)
    expected = after_first - 0.1 * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert params['w'].data[0] == pytest.approx(expected, rel=1e-12)


def test_lr_override_and_moment_state_per_tensor():
    config = OptimizerConfig(lr=1.0)
    params = {'a': Tensor(np.zeros(2), requires_grad=True), 'b': Tensor(np.zeros((2, 2)), requires_grad=True)}
    moments = {'a': Moments.zeros_like(params['a'])}
    moments['a'].t = 4
    optimizer_step(params, moments, {'a': np.ones(2), 'b': np.ones((2, 2))}, config, lr=0.01)
    assert moments['a'].t == 5
    assert moments['b'].t == 1
    np.testing.assert_allclose(params['b'].data, -0.01 * np.ones((2, 2)), rtol=1e-6)


def test_gradient_for_frozen_tensor_is_refused():
    config = OptimizerConfig()
    base = Tensor(np.ones(3))
    with pytest.raises(FrozenTensorError):
        optimizer_step({'adapter': Tensor(np.zeros(3), requires_grad=True)}, {},
                       {'adapter': np.ones(3), 'base': np.ones(3)}, config, frozen={'base': base})
    np.testing.assert_array_equal(base.data, np.ones(3))


def test_gradient_set_must_match_parameters():
    config = OptimizerConfig()
    params = {'w': Tensor(np.zeros(2), requires_grad=True)}
    with pytest.raises(ContractError):
        optimizer_step(params, {}, {}, config)
    with pytest.raises(ContractError):
        optimizer_step(params, {}, {'w': np.zeros(2), 'stray': np.zeros(2)}, config)
    with pytest.raises(ContractError):
        optimizer_step(params, {}, {'w': np.zeros(3)}, config)


def test_untouched_tensors_get_zero_gradients():
    touched = Tensor(np.ones(2), requires_grad=True)
    touched.grad = np.array([1.0, 2.0])
    grads = collect_grads({'touched': touched, 'idle': Tensor(np.ones(3), requires_grad=True)})
    np.testing.assert_array_equal(grads['idle'], np.zeros(3))
    np.testing.assert_array_equal(grads['touched'], [1.0, 2.0])


def test_warmup_ramps_linearly_then_holds():
    config = OptimizerConfig(lr=0.01, warmup_ratio=0.1)
    rates = [warmup_lr(config, step, 100) for step in range(100)]
    assert rates[0] == pytest.approx(0.001)
    assert rates[4] == pytest.approx(0.005)
    assert rates[9] == pytest.approx(0.01)
    assert all(rate == pytest.approx(0.01) for rate in rates[9:])


def test_warmup_rounds_up_to_one_step():
    config = OptimizerConfig(lr=0.02, warmup_ratio=0.01)
    assert warmup_lr(config, 0, 10) == pytest.approx(0.02)
    assert warmup_lr(OptimizerConfig(lr=0.02, warmup_ratio=0.0), 0, 10) == pytest.approx(0.02)


def test_optimizer_config_bounds():
    with pytest.raises(ValidationError):
        OptimizerConfig(lr=0)
    with pytest.raises(ValidationError):
        OptimizerConfig(beta2=1.0)
    with pytest.raises(ValidationError):
        OptimizerConfig(momentum=0.9)
