"""Brute-force enumeration of the decoding tree on small vocabularies.

Ground truth for shortest-path and probability claims. Enumeration treats
every positive-probability token as a child, so it bounds all realizable
outputs regardless of sampling luck. Cost is counted in provider calls and
capped by a work limit (DTS_WORK_LIMIT overrides the default).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any, Sequence

from .core import BranchState, DtsConfig, InvalidInputError, ResourceLimitError, TokenId
from .engine import run_dts

DEFAULT_WORK_LIMIT = 10_000_000
WORK_LIMIT_ENV = "DTS_WORK_LIMIT"


@dataclass(frozen=True)
class EnumeratedPath:
    """A complete root-to-leaf sequence and its exact probability."""

    tokens: tuple[TokenId, ...]
    probability: float
    length: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if not 0.0 < self.probability <= 1.0:
            raise InvalidInputError("path probability must lie in (0, 1]")
        if self.length != len(self.tokens):
            raise InvalidInputError("length must equal the token count")

    def to_json_dict(self) -> dict[str, Any]:
        return {"tokens": list(self.tokens), "probability": self.probability, "length": self.length}

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "EnumeratedPath":
        return cls(
            tokens=tuple(data["tokens"]),
            probability=float(data["probability"]),
            length=int(data["length"]),
        )


def _effective_work_limit(work_limit: int | None) -> int:
    if work_limit is not None:
        return int(work_limit)
    env = os.environ.get(WORK_LIMIT_ENV)
    return int(env) if env else DEFAULT_WORK_LIMIT


def enumerate_tree(
    provider,
    prompt: Sequence[TokenId],
    max_len: int,
    prob_floor: float = 0.0,
    work_limit: int | None = None,
) -> list[EnumeratedPath]:
    """Depth-first enumeration of every terminating sequence up to ``max_len``.

    A child is explored iff its step probability is positive and the path
    probability stays at or above ``prob_floor``. Each expanded node costs
    one provider call against the work limit.
    """
    if max_len < 1:
        raise InvalidInputError("max_len must be >= 1")
    if prob_floor < 0.0:
        raise InvalidInputError("prob_floor must be >= 0")
    limit = _effective_work_limit(work_limit)
    prompt = tuple(int(t) for t in prompt)
    end_tokens = provider.end_tokens
    paths: list[EnumeratedPath] = []
    calls = 0

    def visit(tokens: tuple[TokenId, ...], prob: float):
        nonlocal calls
        calls += 1
        if calls > limit:
            raise ResourceLimitError(
                f"enumeration exceeded the work limit of {limit} provider calls"
            )
        state = BranchState(tokens=tokens, cumulative_logprob=0.0, finished=False, branch_id=0)
        dist = provider.next_distributions(prompt, [state])[0]
        for token in range(provider.vocab_size):
            p = float(dist.probs[token])
            if p <= 0.0:
                continue
            path_prob = prob * p
            if path_prob < prob_floor:
                continue
            child = tokens + (token,)
            if token in end_tokens:
                paths.append(EnumeratedPath(tokens=child, probability=path_prob, length=len(child)))
            elif len(child) < max_len:
                visit(child, path_prob)

    visit((), 1.0)
    return paths


def shortest_terminating(paths: Sequence[EnumeratedPath]) -> tuple[int, list[EnumeratedPath]]:
    """Minimum terminating length and every path attaining it.

    Paths at the minimum are sorted by probability descending, then by
    lexicographic token order.
    """
    if not paths:
        raise InvalidInputError("no terminating paths to rank")
    min_length = min(p.length for p in paths)
    at_min = sorted(
        (p for p in paths if p.length == min_length),
        key=lambda p: (-p.probability, p.tokens),
    )
    return min_length, at_min


def verify_dts_against_oracle(
    provider,
    prompt: Sequence[TokenId],
    config: DtsConfig,
    work_limit: int | None = None,
) -> bool:
    """True iff the engine's output length equals the enumerated minimum.

    With tau = 0, K = vocab_size and an unbounded budget the engine performs
    an exhaustive breadth-first search, so equality must hold; with a
    reduced K the comparison exposes the approximation gap instead.
    """
    paths = enumerate_tree(provider, prompt, config.max_tokens, 0.0, work_limit)
    min_length, _ = shortest_terminating(paths)
    result = run_dts(provider, prompt, config)
    return result.terminated and len(result.output.tokens) == min_length
