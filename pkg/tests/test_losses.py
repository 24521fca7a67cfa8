import math

import numpy as np
import pytest

from conftest import check_grads, rand_tensor
from rtlloc.losses import (EmptySetError, loss_infonce_listwise,
                           loss_infonce_mean, loss_margin_rank, loss_mnrl)
from rtlloc.tensor import DomainError, Tensor


class TestClosedForms:
    def test_mnrl_uniform_similarity_is_ln_k(self):
        # equal scores everywhere: picking the diagonal is a 1-in-4 guess
        sim = Tensor(np.full((4, 4), 0.3))
        assert loss_mnrl(sim, tau=0.05).item() == pytest.approx(
            math.log(4), abs=1e-9)

    def test_listwise_uniform_is_ln_n(self):
        pos = Tensor(np.array(0.2))
        negs = Tensor(np.full(4, 0.2))
        assert loss_infonce_listwise(pos, negs, tau=0.07).item() == \
            pytest.approx(math.log(5), abs=1e-9)

    def test_margin_hand_cases(self):
        # fully separated: hinge inactive
        assert loss_margin_rank(Tensor(np.array([1.0])),
                                Tensor(np.array([0.2])), 0.5).item() == 0.0
        # tied scores: loss equals the margin itself
        assert loss_margin_rank(Tensor(np.array([0.4])),
                                Tensor(np.array([0.4])), 0.5).item() == \
            pytest.approx(0.5)
        # inverted by 0.3: margin plus the violation
        assert loss_margin_rank(Tensor(np.array([0.1])),
                                Tensor(np.array([0.4])), 0.5).item() == \
            pytest.approx(0.8)

    def test_margin_averages_all_pairs(self):
        # 2x2 hinge values: 0, 0, 0.3, 0.5 -> mean 0.2
        pos = Tensor(np.array([1.0, 0.4]))
        neg = Tensor(np.array([0.2, 0.4]))
        assert loss_margin_rank(pos, neg, 0.5).item() == pytest.approx(0.2)


class TestMnrl:
    def test_perfect_diagonal_is_small(self):
        sim = Tensor(np.eye(6))
        assert loss_mnrl(sim, tau=0.05).item() < 1e-6

    def test_temperature_domain(self):
        with pytest.raises(DomainError):
            loss_mnrl(Tensor(np.eye(3)), tau=0.0)
        with pytest.raises(DomainError):
            loss_infonce_listwise(Tensor(np.array(0.5)),
                                  Tensor(np.zeros(3)), tau=-1.0)

    def test_gradients(self, rng):
        sim = rand_tensor(rng, (5, 5), scale=0.3)
        check_grads(lambda: loss_mnrl(sim, tau=0.5), [sim])


class TestListwise:
    def test_empty_negatives_rejected(self):
        with pytest.raises(EmptySetError):
            loss_infonce_listwise(Tensor(np.array(0.5)),
                                  Tensor(np.zeros(0)), tau=0.07)

    def test_gradients(self, rng):
        pos = rand_tensor(rng, (), scale=0.3)
        negs = rand_tensor(rng, (6,), scale=0.3)
        check_grads(lambda: loss_infonce_listwise(pos, negs, tau=0.3),
                    [pos, negs])

    def test_mean_variant_matches_average(self, rng):
        pairs = []
        singles = []
        for _ in range(3):
            pos = Tensor(rng.standard_normal(()) * 0.2)
            negs = Tensor(rng.standard_normal(5) * 0.2)
            pairs.append((pos, negs))
            singles.append(loss_infonce_listwise(pos, negs, 0.2).item())
        assert loss_infonce_mean(pairs, 0.2).item() == \
            pytest.approx(float(np.mean(singles)))


class TestMarginGradients:
    def test_gradients_away_from_kink(self, rng):
        pos = Tensor(rng.standard_normal(8), requires_grad=True)
        neg = Tensor(rng.standard_normal(8), requires_grad=True)
        # push every pair away from the hinge kink at gamma
        gap = pos.data - neg.data
        pos.data[np.abs(0.5 - gap) < 1e-2] += 0.1
        check_grads(lambda: loss_margin_rank(pos, neg, 0.5), [pos, neg])
