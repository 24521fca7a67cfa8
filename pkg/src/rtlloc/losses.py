"""Training losses: batched contrastive, listwise contrastive, margin rank."""
from __future__ import annotations

import numpy as np

from .tensor import (DomainError, Tensor, as_tensor, concat, hinge,
                     log_softmax, mul, reshape, tmean, tsum)


class EmptySetError(ValueError):
    pass


def loss_mnrl(sim: Tensor, tau: float) -> Tensor:
    """Batched contrastive loss over a k x k similarity matrix.

    sim[j][l] is the similarity of query j with the positive of pair l;
    the diagonal holds each query's own positive.
    """
    if tau <= 0:
        raise DomainError(f"temperature must be positive, got {tau}")
    sim = as_tensor(sim)
    k = sim.data.shape[0]
    if sim.data.shape != (k, k):
        raise DomainError(f"similarity matrix must be square, got {sim.data.shape}")
    logp = log_softmax(mul(sim, 1.0 / tau), axis=1)
    diag = tsum(mul(logp, Tensor(np.eye(k))))
    return mul(diag, -1.0 / k)


def loss_infonce_listwise(pos_sim, neg_sims, tau: float) -> Tensor:
    """-log softmax probability of the positive among {pos} + negatives."""
    if tau <= 0:
        raise DomainError(f"temperature must be positive, got {tau}")
    pos = reshape(as_tensor(pos_sim), (1,))
    if isinstance(neg_sims, (list, tuple)) and len(neg_sims) > 0 and \
            isinstance(neg_sims[0], Tensor):
        negs = concat([reshape(t, (1,)) for t in neg_sims], axis=0)
    else:
        negs = reshape(as_tensor(neg_sims), (-1,))
    if negs.data.shape[0] == 0:
        raise EmptySetError("listwise loss needs at least one negative")
    logits = mul(concat([pos, negs], axis=0), 1.0 / tau)
    logp = log_softmax(logits, axis=0)
    one_hot = np.zeros(logits.data.shape[0])
    one_hot[0] = 1.0
    return mul(tsum(mul(logp, Tensor(one_hot))), -1.0)


def loss_infonce_mean(pairs: list[tuple], tau: float) -> Tensor:
    """Mean listwise loss over a positive set: (1/|P|) sum of per-positive terms."""
    if not pairs:
        raise EmptySetError("no positives")
    terms = [reshape(loss_infonce_listwise(pos, negs, tau), (1,))
             for pos, negs in pairs]
    return tmean(concat(terms, axis=0))


def loss_margin_rank(pos_scores, neg_scores, gamma: float) -> Tensor:
    """Averaged pairwise hinge: mean over P x N of max(0, gamma - s_p + s_n)."""
    pos = reshape(as_tensor(pos_scores), (-1,))
    neg = reshape(as_tensor(neg_scores), (-1,))
    np_, nn = pos.data.shape[0], neg.data.shape[0]
    if np_ == 0 or nn == 0:
        raise EmptySetError("positive and negative score lists must be non-empty")
    diff = (reshape(neg, (1, nn)) - reshape(pos, (np_, 1))) + gamma
    return tmean(hinge(diff))
