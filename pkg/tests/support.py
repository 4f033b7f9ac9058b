"""Shared fixtures: deterministic random model generators, a scripted
two-fork tree, and trace-replay tooling used to audit engine runs."""

from __future__ import annotations

import random
from collections import defaultdict

from dts import DistributionProvider, NGramModel, PfsaModel, ScriptedModel, train_ngram
from dts.oracle import enumerate_tree


class FixedRng:
    """Replays a scripted list of uniforms; counts draws like the real rng."""

    def __init__(self, values):
        self.values = list(values)
        self.draws = 0

    def uniform(self):
        value = self.values[self.draws]
        self.draws += 1
        return value


class RecordingProvider(DistributionProvider):
    """Wraps a provider and remembers every distribution it served."""

    def __init__(self, inner):
        self.inner = inner
        self.vocab_size = inner.vocab_size
        self.end_tokens = inner.end_tokens
        self.vocab = inner.vocab
        self.seen = {}
        self.calls = 0

    def distribution(self, prompt, tokens):
        self.calls += 1
        dist = self.inner.distribution(prompt, tokens)
        self.seen[(prompt, tokens)] = dist
        return dist


def random_pfsa(seed, max_vocab=6, max_states=4, require_path_within=None):
    """Deterministic random PFSA; emissions are sparse so trees stay small.

    With ``require_path_within`` set, reroll (deterministically) until the
    automaton has a terminating path no longer than that depth.
    """
    attempt = 0
    while True:
        rnd = random.Random(f"pfsa:{seed}:{attempt}")
        vocab_size = rnd.randint(3, max_vocab)
        end = vocab_size - 1
        content = list(range(vocab_size - 1))
        n_states = rnd.randint(2, max_states)
        emissions = {}
        transitions = {}
        for state in range(n_states):
            support = rnd.sample(content, rnd.randint(1, min(3, len(content))))
            weights = {t: rnd.uniform(0.1, 1.0) for t in support}
            if state == n_states - 1 or rnd.random() < 0.4:
                weights[end] = rnd.uniform(0.1, 1.0)
            total = sum(weights.values())
            row = [0.0] * vocab_size
            for token, weight in weights.items():
                row[token] = weight / total
            emissions[state] = row
            transitions[state] = {t: rnd.randrange(n_states) for t in support}
        model = PfsaModel(
            initial_state=0, emissions=emissions, transitions=transitions, end_tokens=[end]
        )
        if require_path_within is None:
            return model
        if enumerate_tree(model, [], max_len=require_path_within, work_limit=200_000):
            return model
        attempt += 1


def random_ngram(seed) -> NGramModel:
    """Deterministic random smoothed n-gram model (full-support rows)."""
    rnd = random.Random(f"ngram:{seed}")
    high = rnd.randint(2, 5)
    corpus = [[0, 1, 2]]
    for _ in range(rnd.randint(2, 5)):
        corpus.append([rnd.randint(0, high) for _ in range(rnd.randint(4, 12))])
    return train_ngram(corpus, n=rnd.choice([1, 2, 3]), alpha=rnd.uniform(0.2, 2.0))


def one_hot_logits(vocab_size, *hot, scale=50.0):
    row = [0.0] * vocab_size
    for token in hot:
        row[token] = scale
    return row


def two_fork_scripted() -> ScriptedModel:
    """Scripted tree with exactly two high-entropy positions (K=2 fixture).

    Hand trace with tau=0.5, K=2, temperature 1, end token 5:
      step 0: certain 1                         -> [1]
      step 1: fork {2, 3}                       -> [1,2](id 0), [1,3](id 1)
      step 2: certain continuations             -> [1,2,4], [1,3,0]
      step 3: id 0 forks {0, 1}, id 1 certain   -> [1,2,4,0](id 0),
                                                   [1,3,0,2](id 1),
                                                   [1,2,4,1](id 2)
      step 4: id 0 reaches the end token        -> winner [1,2,4,0,5]
    Expect 2 branch events, peak frontier 3, 5 steps.
    """
    V = 6
    rules = [
        ([4, 1], one_hot_logits(V, 2)),
        ([4, 0], one_hot_logits(V, 5)),
        ([0, 2], one_hot_logits(V, 4)),
        ([2, 4], one_hot_logits(V, 0, 1)),
        ([3, 0], one_hot_logits(V, 2)),
        ([1, 2], one_hot_logits(V, 4)),
        ([1, 3], one_hot_logits(V, 0)),
        ([1], one_hot_logits(V, 2, 3)),
    ]
    return ScriptedModel(rules, one_hot_logits(V, 1), temperature=1.0, end_tokens=[5])

TWO_FORK_WINNER = (1, 2, 4, 0, 5)


def replay_steps(traces):
    """Reconstruct each traced branch's token prefix, step by step.

    Mirrors the engine's id allocation: traces are walked per step in
    ascending branch id, the first chosen token continues the same id, and
    later tokens claim fresh ids in order. Yields (step, [(trace, prefix)]).
    """
    by_step = defaultdict(list)
    for trace in traces:
        by_step[trace.step].append(trace)
    prefixes = {0: ()}
    next_id = 1
    for step in sorted(by_step):
        rows = sorted(by_step[step], key=lambda t: t.branch_id)
        yield step, [(t, prefixes[t.branch_id]) for t in rows]
        updated = {}
        for trace in rows:
            base = prefixes[trace.branch_id]
            updated[trace.branch_id] = base + (trace.chosen_tokens[0],)
            for token in trace.chosen_tokens[1:]:
                updated[next_id] = base + (token,)
                next_id += 1
        prefixes = updated
