"""Deterministic probabilistic finite-state automaton provider.

Each state carries an emission distribution over the vocabulary, end token
included, and a transition function on emitted tokens. Because the automaton
is deterministic, the probability of any complete sequence is the plain
product of its per-step emissions, which makes PFSA instances exactly
analyzable and the natural fixture for oracle comparisons.

The prompt is accepted and ignored: the state is driven by the generated
tokens alone.
"""

from __future__ import annotations

import json
from typing import Hashable, Optional, Sequence

import numpy as np

from ..core import InvalidInputError, TokenDistribution, TokenId
from .base import DistributionProvider

State = Hashable
_EMISSION_SUM_TOL = 1e-9


class PfsaModel(DistributionProvider):
    def __init__(
        self,
        initial_state: State,
        emissions: dict[State, Sequence[float]],
        transitions: dict[State, dict[TokenId, State]],
        end_tokens: Sequence[TokenId],
        vocab: Optional[Sequence[str]] = None,
    ):
        if initial_state not in emissions:
            raise InvalidInputError("initial state has no emission distribution")
        sizes = {len(row) for row in emissions.values()}
        if len(sizes) != 1:
            raise InvalidInputError("all emission rows must have the same length")
        self.vocab_size = sizes.pop()
        self.end_tokens = frozenset(int(t) for t in end_tokens)
        self.vocab = tuple(vocab) if vocab is not None else None
        self._check_vocab()

        self.initial_state = initial_state
        self.transitions = {s: dict(t) for s, t in transitions.items()}
        self.emissions: dict[State, TokenDistribution] = {}
        for state, row in emissions.items():
            arr = np.asarray(row, dtype=np.float64)
            if abs(float(arr.sum()) - 1.0) > _EMISSION_SUM_TOL:
                raise InvalidInputError(f"emissions of state {state!r} do not sum to 1")
            self.emissions[state] = TokenDistribution(arr)
            for token in range(self.vocab_size):
                if float(arr[token]) > 0.0 and token not in self.end_tokens:
                    target = self.transitions.get(state, {}).get(token)
                    if target is None:
                        raise InvalidInputError(
                            f"state {state!r} emits token {token} but has no transition for it"
                        )
                    if target not in emissions:
                        raise InvalidInputError(
                            f"transition from {state!r} on {token} leads to unknown state {target!r}"
                        )
        # prefix -> state cache; amortizes sequence walks to O(1) per new prefix
        self._state_cache: dict[tuple[TokenId, ...], State] = {(): initial_state}

    def state_for(self, tokens: tuple[TokenId, ...]) -> State:
        cached = self._state_cache.get(tokens)
        if cached is not None:
            return cached
        previous = self.state_for(tokens[:-1])
        token = tokens[-1]
        try:
            state = self.transitions[previous][token]
        except KeyError:
            raise InvalidInputError(
                f"no transition from state {previous!r} on token {token}"
            ) from None
        self._state_cache[tokens] = state
        return state

    def distribution(self, prompt, tokens) -> TokenDistribution:
        return self.emissions[self.state_for(tuple(tokens))]

    def sequence_probability(self, tokens: Sequence[TokenId]) -> float:
        """Product of per-step emission probabilities along the sequence."""
        prob = 1.0
        state = self.initial_state
        for i, token in enumerate(tokens):
            prob *= float(self.emissions[state].probs[token])
            if token in self.end_tokens:
                if i != len(tokens) - 1:
                    raise InvalidInputError("end token occurs before the end of the sequence")
                return prob
            state = self.transitions[state][token]
        return prob

    @classmethod
    def from_file(cls, path: str) -> "PfsaModel":
        """Load the JSON form documented in the README.

        {"initial_state": ..., "end_tokens": [...], "vocab": [...]?,
         "states": {name: {"emissions": [...], "transitions": {token: name}}}}
        """
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        emissions = {}
        transitions = {}
        for name, spec in data["states"].items():
            emissions[name] = spec["emissions"]
            transitions[name] = {int(t): s for t, s in spec.get("transitions", {}).items()}
        return cls(
            initial_state=data["initial_state"],
            emissions=emissions,
            transitions=transitions,
            end_tokens=data["end_tokens"],
            vocab=data.get("vocab"),
        )
