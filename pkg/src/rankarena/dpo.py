"""Numeric reference for the direct-preference objective.

Validates preference datasets and any external training pipeline; no
parameter updates happen here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

DEFAULT_BETA = 0.1


@dataclass(frozen=True)
class PreferenceLogProbs:
    """Natural-log likelihoods of the chosen/rejected texts under both policies."""

    logp_policy_chosen: float
    logp_policy_rejected: float
    logp_ref_chosen: float
    logp_ref_rejected: float
    beta: float = DEFAULT_BETA

    def __post_init__(self) -> None:
        values = (
            self.logp_policy_chosen,
            self.logp_policy_rejected,
            self.logp_ref_chosen,
            self.logp_ref_rejected,
            self.beta,
        )
        if not all(math.isfinite(v) for v in values):
            raise ValueError("all log-probabilities and beta must be finite")
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def softplus(x: float) -> float:
    """log(1 + e^x), overflow-safe for large |x|."""
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def preference_margin(p: PreferenceLogProbs) -> float:
    """Chosen-vs-rejected log-ratio margin against the reference policy."""
    chosen = p.logp_policy_chosen - p.logp_ref_chosen
    rejected = p.logp_policy_rejected - p.logp_ref_rejected
    return chosen - rejected


def dpo_loss(p: PreferenceLogProbs) -> float:
    """-log sigmoid(beta * margin), computed as softplus(-beta * margin).

    Strictly positive for finite inputs and monotone decreasing in the
    margin; equals ln 2 when policy and reference agree on both texts.
    """
    return softplus(-p.beta * preference_margin(p))


def dpo_loss_batch(items: Iterable[PreferenceLogProbs]) -> float:
    """Arithmetic mean of per-item losses."""
    losses = [dpo_loss(p) for p in items]
    if not losses:
        raise ValueError("empty batch")
    return math.fsum(losses) / len(losses)


def margin_gradient(p: PreferenceLogProbs) -> float:
    """d(loss)/d(margin) = -beta * sigmoid(-beta * margin)."""
    return -p.beta * sigmoid(-p.beta * preference_margin(p))
