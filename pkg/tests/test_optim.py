import numpy as np
import pytest

from rtlloc.layers import Parameter
from rtlloc.optim import AdamW, linear_warmup_lr


def adamw_oracle(p, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8, wd=0.01):
    """Independent reference: decoupled weight decay, bias-corrected moments."""
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        p = p - lr * (mhat / (np.sqrt(vhat) + eps) + wd * p)
    return p


class TestAdamW:
    def test_matches_oracle_over_steps(self, rng):
        start = rng.standard_normal((3, 4))
        grads = [rng.standard_normal((3, 4)) for _ in range(5)]
        param = Parameter("w", start.copy())
        opt = AdamW([param], lr=0.01)
        for g in grads:
            param.tensor.grad = g.copy()
            opt.step()
        assert np.allclose(param.data, adamw_oracle(start, grads, 0.01),
                           atol=1e-12)

    def test_scalar_single_step_hand_check(self):
        # one step from p=1 with g=2: mhat=2, vhat=4, so p ~ 1 - lr*(1 + wd)
        param = Parameter("w", np.array([1.0]))
        opt = AdamW([param], lr=0.1)
        param.tensor.grad = np.array([2.0])
        opt.step()
        expected = 1.0 - 0.1 * (2.0 / (2.0 + 1e-8) + 0.01 * 1.0)
        assert param.data[0] == pytest.approx(expected, abs=1e-12)

    def test_decay_decoupled_from_gradient(self):
        # zero gradient still shrinks the weight (decay is not in the moment)
        param = Parameter("w", np.array([1.0]))
        opt = AdamW([param], lr=0.1)
        param.tensor.grad = np.array([0.0])
        opt.step()
        assert param.data[0] == pytest.approx(1.0 - 0.1 * 0.01)

    def test_frozen_params_untouched(self, rng):
        param = Parameter("w", rng.standard_normal((2, 2)))
        before = param.data.copy()
        param.frozen = True
        opt = AdamW([param], lr=0.5)
        param.tensor.grad = np.ones((2, 2))
        opt.step()
        assert np.array_equal(param.data, before)

    def test_zero_grad(self, rng):
        param = Parameter("w", rng.standard_normal(3))
        opt = AdamW([param], lr=0.1)
        param.tensor.grad = np.ones(3)
        opt.zero_grad()
        assert param.tensor.grad is None or \
            np.allclose(param.tensor.grad, 0.0)


class TestWarmup:
    def test_boundaries(self):
        # 10% of 100 steps: ramp over the first 10, flat afterwards
        assert linear_warmup_lr(0, 100, 1.0, 0.1) == pytest.approx(0.1)
        assert linear_warmup_lr(9, 100, 1.0, 0.1) == pytest.approx(1.0)
        assert linear_warmup_lr(10, 100, 1.0, 0.1) == 1.0
        assert linear_warmup_lr(99, 100, 1.0, 0.1) == 1.0

    def test_monotone_during_ramp(self):
        vals = [linear_warmup_lr(s, 200, 3e-4, 0.1) for s in range(20)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_zero_warmup_is_constant(self):
        assert linear_warmup_lr(0, 50, 1e-3, 0.0) == 1e-3
