"""Shared domain types for the decoding engine.

Token sequences, frontiers, run configuration and run results. All values
are immutable after construction; mutation happens only by building new
values inside the engine step loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

# A token is a non-negative index into a provider's vocabulary.
TokenId = int

PROB_SUM_TOL = 1e-6


class DtsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(DtsError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class LogicError(DtsError):
    """An operation was invoked in a state it does not support."""


class ProviderError(DtsError):
    """A provider call failed while the engine was running; carries step context."""


class TransportError(DtsError):
    """HTTP-level failure talking to a remote provider."""

    def __init__(self, message: str, attempts: int = 1):
        super().__init__(message)
        self.attempts = attempts


class ProtocolError(DtsError):
    """A remote provider returned a payload that violates the wire contract."""


class ResourceLimitError(DtsError):
    """A configured work limit was exceeded."""


class DatasetError(DtsError):
    """A dataset file could not be parsed."""


@dataclass(frozen=True, eq=False)
class TokenDistribution:
    """Probability vector over a vocabulary at one decoding position.

    Entries are non-negative and sum to 1 within ``PROB_SUM_TOL``. The
    underlying array is copied and frozen at construction.
    """

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise InvalidInputError("distribution must be a non-empty 1-d vector")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("distribution entries must be finite")
        if np.any(arr < 0.0):
            raise InvalidInputError("distribution entries must be non-negative")
        total = float(arr.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise InvalidInputError(f"distribution sums to {total}, expected 1 within {PROB_SUM_TOL}")
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)

    @property
    def vocab_size(self) -> int:
        return int(self.probs.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TokenDistribution):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)

    def to_json_dict(self) -> dict[str, Any]:
        return {"probs": [float(p) for p in self.probs]}

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "TokenDistribution":
        return cls(np.asarray(data["probs"], dtype=np.float64))


@dataclass(frozen=True)
class BranchState:
    """One reasoning path: its tokens, score and lineage."""

    tokens: tuple[TokenId, ...]
    cumulative_logprob: float
    finished: bool
    branch_id: int
    parent_branch_id: Optional[int] = None
    fork_step: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if any(t < 0 for t in self.tokens):
            raise InvalidInputError("token ids must be non-negative")
        if self.cumulative_logprob > 0.0:
            raise InvalidInputError("cumulative log-probability cannot be positive")
        if self.branch_id < 0:
            raise InvalidInputError("branch_id must be non-negative")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "tokens": list(self.tokens),
            "cumulative_logprob": self.cumulative_logprob,
            "finished": self.finished,
            "branch_id": self.branch_id,
            "parent_branch_id": self.parent_branch_id,
            "fork_step": self.fork_step,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "BranchState":
        return cls(
            tokens=tuple(data["tokens"]),
            cumulative_logprob=float(data["cumulative_logprob"]),
            finished=bool(data["finished"]),
            branch_id=int(data["branch_id"]),
            parent_branch_id=data.get("parent_branch_id"),
            fork_step=data.get("fork_step"),
        )


@dataclass(frozen=True)
class Frontier:
    """The set of active branches at one step, all unfinished ones of equal length."""

    step: int
    branches: tuple[BranchState, ...]
    next_branch_id: int

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise InvalidInputError("frontier must hold at least one branch")
        ids = [b.branch_id for b in self.branches]
        if len(set(ids)) != len(ids):
            raise InvalidInputError("branch ids within a frontier must be unique")
        for b in self.branches:
            if not b.finished and len(b.tokens) != self.step:
                raise InvalidInputError(
                    f"unfinished branch {b.branch_id} has {len(b.tokens)} tokens at step {self.step}"
                )
        if self.next_branch_id <= max(ids):
            raise InvalidInputError("next_branch_id must exceed every existing branch id")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "branches": [b.to_json_dict() for b in self.branches],
            "next_branch_id": self.next_branch_id,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "Frontier":
        return cls(
            step=int(data["step"]),
            branches=tuple(BranchState.from_json_dict(b) for b in data["branches"]),
            next_branch_id=int(data["next_branch_id"]),
        )


@dataclass(frozen=True)
class DtsConfig:
    """Decoding parameters.

    ``tau`` is the entropy threshold in nats; ``tau = math.inf`` means never
    branch. ``max_branches`` caps the frontier; the cap is enforced by
    demoting branch decisions, never by dropping live branches.
    """

    tau: float
    k: int
    temperature: float
    max_tokens: int
    end_tokens: frozenset[TokenId]
    max_branches: int = 32
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "end_tokens", frozenset(int(t) for t in self.end_tokens))
        if math.isnan(self.tau) or self.tau < 0.0:
            raise InvalidInputError("tau must be >= 0 (math.inf disables branching)")
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if not self.temperature > 0.0 or math.isnan(self.temperature):
            raise InvalidInputError("temperature must be > 0")
        if self.max_tokens < 1:
            raise InvalidInputError("max_tokens must be >= 1")
        if self.max_branches < 1:
            raise InvalidInputError("max_branches must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise InvalidInputError("seed must fit in 64 unsigned bits")
        if not self.end_tokens:
            raise InvalidInputError("end_tokens must be non-empty")
        if any(t < 0 for t in self.end_tokens):
            raise InvalidInputError("end tokens must be non-negative ids")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "tau": self.tau,
            "k": self.k,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "max_branches": self.max_branches,
            "seed": self.seed,
            "end_tokens": sorted(self.end_tokens),
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "DtsConfig":
        return cls(
            tau=float(data["tau"]),
            k=int(data["k"]),
            temperature=float(data["temperature"]),
            max_tokens=int(data["max_tokens"]),
            max_branches=int(data.get("max_branches", 32)),
            seed=int(data.get("seed", 0)),
            end_tokens=frozenset(data["end_tokens"]),
        )


@dataclass(frozen=True)
class StepTrace:
    """What happened to one branch at one step: entropy seen, fanned out or not."""

    step: int
    branch_id: int
    entropy: float
    branched: bool
    chosen_tokens: tuple[TokenId, ...]

    def __post_init__(self):
        object.__setattr__(self, "chosen_tokens", tuple(int(t) for t in self.chosen_tokens))
        if self.branched and len(self.chosen_tokens) < 2:
            raise InvalidInputError("a branching trace must record at least two tokens")
        if not self.branched and len(self.chosen_tokens) != 1:
            raise InvalidInputError("a non-branching trace records exactly one token")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "step": self.step,
            "branch_id": self.branch_id,
            "entropy": self.entropy,
            "branched": self.branched,
            "chosen_tokens": list(self.chosen_tokens),
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "StepTrace":
        return cls(
            step=int(data["step"]),
            branch_id=int(data["branch_id"]),
            entropy=float(data["entropy"]),
            branched=bool(data["branched"]),
            chosen_tokens=tuple(data["chosen_tokens"]),
        )


@dataclass(frozen=True)
class RunResult:
    """Outcome of one decoding run."""

    output: BranchState
    terminated: bool
    steps_executed: int
    peak_frontier_size: int
    total_branch_events: int
    traces: tuple[StepTrace, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))

    def to_json_dict(self, include_traces: bool = True) -> dict[str, Any]:
        data: dict[str, Any] = {
            "output": self.output.to_json_dict(),
            "terminated": self.terminated,
            "steps_executed": self.steps_executed,
            "peak_frontier_size": self.peak_frontier_size,
            "total_branch_events": self.total_branch_events,
        }
        if include_traces:
            data["traces"] = [t.to_json_dict() for t in self.traces]
        return data

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "RunResult":
        return cls(
            output=BranchState.from_json_dict(data["output"]),
            terminated=bool(data["terminated"]),
            steps_executed=int(data["steps_executed"]),
            peak_frontier_size=int(data["peak_frontier_size"]),
            total_branch_events=int(data["total_branch_events"]),
            traces=tuple(StepTrace.from_json_dict(t) for t in data.get("traces", [])),
        )
