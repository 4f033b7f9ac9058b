"""Per-position decoding math: temperature scaling, entropy, top-K, sampling,
and the entropy-gated branch decision.

All logarithms are natural. The branch decision is the adaptive rule at the
heart of the engine: fan out into the top-K most probable tokens when the
next-token entropy reaches the threshold, otherwise sample a single token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DtsConfig, InvalidInputError, TokenDistribution, TokenId


@dataclass(frozen=True)
class BranchDecision:
    """Tokens chosen for one branch at one position.

    ``branched`` is true only when the decision actually fans out (two or
    more tokens). ``logprobs`` holds ln P(token), aligned with ``tokens``.
    """

    entropy: float
    branched: bool
    tokens: tuple[TokenId, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "logprobs", tuple(float(x) for x in self.logprobs))
        if len(self.tokens) != len(self.logprobs):
            raise InvalidInputError("tokens and logprobs must align")
        if not self.tokens:
            raise InvalidInputError("a decision must carry at least one token")
        if len(set(self.tokens)) != len(self.tokens):
            raise InvalidInputError("decision tokens must be distinct")
        if self.branched and len(self.tokens) < 2:
            raise InvalidInputError("a branching decision needs at least two tokens")
        if not self.branched and len(self.tokens) != 1:
            raise InvalidInputError("a non-branching decision carries exactly one token")


def softmax_with_temperature(logits, temperature: float) -> TokenDistribution:
    """Numerically stable softmax of ``logits / temperature``."""
    if math.isnan(temperature) or not temperature > 0.0:
        raise InvalidInputError("temperature must be > 0")
    arr = np.asarray(logits, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise InvalidInputError("logits must be a non-empty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logits must be finite")
    scaled = arr / temperature
    shifted = scaled - scaled.max()
    weights = np.exp(shifted)
    return TokenDistribution(weights / weights.sum())


def entropy(dist: TokenDistribution) -> float:
    """Shannon entropy in nats, with 0 * log 0 taken as 0."""
    p = dist.probs[dist.probs > 0.0]
    h = float(-(p * np.log(p)).sum())
    # guard against -0.0 and tiny negative rounding on near-one-hot inputs
    return max(h, 0.0)


def top_k_tokens(dist: TokenDistribution, k: int) -> list[tuple[TokenId, float]]:
    """The ``k`` most probable tokens, highest probability first.

    Ties at equal probability are broken toward the lower token id, which
    makes the selection deterministic across runs and implementations.
    """
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if k > dist.vocab_size:
        raise InvalidInputError(f"k={k} exceeds vocabulary size {dist.vocab_size}")
    # stable argsort on -p keeps ascending token id among equal probabilities
    order = np.argsort(-dist.probs, kind="stable")[:k]
    out = []
    for i in order:
        p = float(dist.probs[i])
        out.append((int(i), math.log(p) if p > 0.0 else float("-inf")))
    return out


def sample_token(dist: TokenDistribution, rng) -> tuple[TokenId, float]:
    """Draw one token by inverse CDF over ascending token ids.

    Consumes exactly one uniform draw. The chosen token is the smallest id
    whose cumulative probability strictly exceeds the draw, so tokens with
    zero probability are never returned.
    """
    u = rng.uniform()
    cum = 0.0
    last_positive = -1
    for i, p in enumerate(dist.probs):
        p = float(p)
        if p <= 0.0:
            continue
        last_positive = i
        cum += p
        if cum > u:
            return i, math.log(p)
    # cumulative rounding left cum <= u; fall back to the last real token
    return last_positive, math.log(float(dist.probs[last_positive]))


def branch_function(dist: TokenDistribution, config: DtsConfig, rng) -> BranchDecision:
    """Decide how one branch extends at the current position.

    Entropy at or above ``config.tau``: deterministically select the top-K
    positive-probability tokens, consuming no randomness. Below the
    threshold: sample a single token, consuming exactly one uniform draw.
    A high-entropy decision that selects fewer than two tokens (K = 1, or a
    support smaller than K) is reported as non-branching since nothing
    forked.
    """
    h = entropy(dist)
    if h >= config.tau:
        ranked = top_k_tokens(dist, min(config.k, dist.vocab_size))
        selected = [(t, lp) for t, lp in ranked if lp > float("-inf")]
        if len(selected) >= 2:
            tokens, logprobs = zip(*selected)
            return BranchDecision(entropy=h, branched=True, tokens=tokens, logprobs=logprobs)
        token, logprob = selected[0]
        return BranchDecision(entropy=h, branched=False, tokens=(token,), logprobs=(logprob,))
    token, logprob = sample_token(dist, rng)
    return BranchDecision(entropy=h, branched=False, tokens=(token,), logprobs=(logprob,))
