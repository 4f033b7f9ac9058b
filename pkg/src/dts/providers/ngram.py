"""N-gram provider with additive smoothing, a desk-scale language model.

P(v | ctx) = (count(ctx, v) + alpha) / (total(ctx) + alpha * V), where ctx is
the last n-1 tokens. Unseen contexts fall back to the uniform smoothing
floor, so every distribution has full support and the model can always
terminate.
"""

from __future__ import annotations

from collections import Counter
from typing import Optional, Sequence

import numpy as np

from ..core import InvalidInputError, TokenDistribution, TokenId
from .base import DistributionProvider


class NGramModel(DistributionProvider):
    def __init__(
        self,
        n: int,
        alpha: float,
        counts: dict[tuple[TokenId, ...], Counter],
        vocab_size: int,
        end_tokens: Sequence[TokenId],
        vocab: Optional[Sequence[str]] = None,
    ):
        if n < 1:
            raise InvalidInputError("n-gram order must be >= 1")
        if not alpha > 0.0:
            raise InvalidInputError("smoothing constant alpha must be > 0")
        self.n = int(n)
        self.alpha = float(alpha)
        self.counts = {tuple(ctx): Counter(c) for ctx, c in counts.items()}
        self.context_totals = {ctx: sum(c.values()) for ctx, c in self.counts.items()}
        self.vocab_size = int(vocab_size)
        self.end_tokens = frozenset(int(t) for t in end_tokens)
        self.vocab = tuple(vocab) if vocab is not None else None
        self._check_vocab()
        self._cache: dict[tuple[TokenId, ...], TokenDistribution] = {}

    def _context(self, prompt, tokens) -> tuple[TokenId, ...]:
        if self.n == 1:
            return ()
        full = prompt + tokens
        return full[max(0, len(full) - (self.n - 1)):]

    def distribution(self, prompt, tokens) -> TokenDistribution:
        ctx = self._context(prompt, tokens)
        cached = self._cache.get(ctx)
        if cached is not None:
            return cached
        row = np.full(self.vocab_size, self.alpha, dtype=np.float64)
        total = self.context_totals.get(ctx, 0)
        for token, count in self.counts.get(ctx, {}).items():
            row[token] += count
        dist = TokenDistribution(row / (total + self.alpha * self.vocab_size))
        self._cache[ctx] = dist
        return dist

    @classmethod
    def from_text_corpus(
        cls, lines: Sequence[str], n: int, alpha: float, end_word: str = "<e>"
    ) -> "NGramModel":
        """Build from whitespace-tokenized text, one sequence per line.

        The vocabulary is the sorted set of corpus words plus the reserved
        end word, which takes the last token id.
        """
        sequences_words = [line.split() for line in lines if line.strip()]
        if not sequences_words:
            raise InvalidInputError("corpus is empty")
        words = sorted({w for seq in sequences_words for w in seq if w != end_word})
        vocab = tuple(words) + (end_word,)
        word_to_id = {w: i for i, w in enumerate(vocab)}
        corpus = [[word_to_id[w] for w in seq] for seq in sequences_words]
        end_token = len(vocab) - 1
        return train_ngram(
            corpus, n, alpha, vocab_size=len(vocab), end_tokens=[end_token], vocab=vocab
        )


def train_ngram(
    corpus: Sequence[Sequence[TokenId]],
    n: int,
    alpha: float,
    vocab_size: Optional[int] = None,
    end_tokens: Optional[Sequence[TokenId]] = None,
    vocab: Optional[Sequence[str]] = None,
) -> NGramModel:
    """Count all length-n windows of the corpus into an NGramModel.

    When ``vocab_size`` is omitted it is inferred as max token id + 2,
    reserving one fresh id to act as the end token.
    """
    if n < 1:
        raise InvalidInputError("n-gram order must be >= 1")
    if not alpha > 0.0:
        raise InvalidInputError("smoothing constant alpha must be > 0")
    sequences = [tuple(int(t) for t in seq) for seq in corpus]
    if not sequences or all(not seq for seq in sequences):
        raise InvalidInputError("corpus is empty")
    max_token = max((t for seq in sequences for t in seq), default=-1)
    if vocab_size is None:
        vocab_size = max_token + 2
        if end_tokens is None:
            end_tokens = [max_token + 1]
    elif end_tokens is None:
        end_tokens = [vocab_size - 1]
    if max_token >= vocab_size:
        raise InvalidInputError("corpus token exceeds vocab_size")

    counts: dict[tuple[TokenId, ...], Counter] = {}
    for seq in sequences:
        for i in range(len(seq) - n + 1):
            window = seq[i:i + n]
            ctx, target = window[:-1], window[-1]
            counts.setdefault(ctx, Counter())[target] += 1
    return NGramModel(n, alpha, counts, vocab_size, end_tokens, vocab=vocab)
