"""Mask-predictor interface and toy implementations.

The predictors are deliberately small and deterministic: they exist to make
decoding-order phenomena observable and testable at desk scale, not to model
language well.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Optional, Protocol, Sequence

import numpy as np

from .core import MASK, MaskedSequence, Vocabulary, as_logit_matrix


class MaskPredictor(Protocol):
    vocab: Vocabulary

    def logits(self, x_t: MaskedSequence) -> np.ndarray:
        """One logit row of length V per response position (masked or not)."""
        ...


def nearest_unmasked_distance(x_t: MaskedSequence) -> list[int]:
    """Distance from each response position to the closest unmasked token.

    Bidirectional; prompt tokens count as unmasked context sitting just left of
    response position 0, so an all-masked response gets distances 1, 2, 3, ...
    """
    n = x_t.gen_length
    dist = [0] * n
    for j in range(n):
        if x_t.response[j] is not MASK:
            continue
        best = j + 1 if x_t.prompt else n + 1  # prompt boundary
        for i, tok in enumerate(x_t.response):
            if tok is not MASK:
                best = min(best, abs(j - i))
        dist[j] = best
    return dist


class ScriptedPredictor:
    """Deterministic fixture: logit matrices keyed by the set of unmasked
    response positions, with an optional default."""

    def __init__(self, vocab: Vocabulary, gen_length: int,
                 table: dict[frozenset, np.ndarray], default: Optional[np.ndarray] = None):
        self.vocab = vocab
        self.gen_length = gen_length
        self.table = {frozenset(k): as_logit_matrix(v, gen_length, vocab.size)
                      for k, v in table.items()}
        self.default = None if default is None else as_logit_matrix(default, gen_length, vocab.size)

    def logits(self, x_t: MaskedSequence) -> np.ndarray:
        key = frozenset(i for i, tok in enumerate(x_t.response) if tok is not MASK)
        if key in self.table:
            return self.table[key]
        if self.default is not None:
            return self.default
        raise KeyError(f"no scripted logits for unmasked set {sorted(key)}")


class PositionalBiasPredictor:
    """Reproduces the left-to-right bias of confidence decoding.

    The target token's logit at a masked position j is base_margin plus
    proximity_boost / (1 + dist(j)), so positions adjacent to unmasked context
    are more confident and greedy selection walks outward from it.
    """

    def __init__(self, vocab: Vocabulary, target: Sequence[int],
                 base_margin: float = 2.0, proximity_boost: float = 4.0):
        if any(not (0 <= t < vocab.size) or t == vocab.mask_id for t in target):
            raise ValueError("target tokens must be valid non-mask ids")
        self.vocab = vocab
        self.target = tuple(target)
        self.base_margin = base_margin
        self.proximity_boost = proximity_boost

    def logits(self, x_t: MaskedSequence) -> np.ndarray:
        if x_t.gen_length != len(self.target):
            raise ValueError("target length must equal gen_length")
        dist = nearest_unmasked_distance(x_t)
        mat = np.zeros((x_t.gen_length, self.vocab.size))
        for j, tok in enumerate(self.target):
            if x_t.response[j] is MASK:
                mat[j, tok] = self.base_margin + self.proximity_boost / (1 + dist[j])
            else:
                mat[j, x_t.response[j]] = self.base_margin + self.proximity_boost
        return mat


class GapProfilePredictor:
    """Static rows with position-dependent gap profiles.

    At scale 1 the per-position confidences strictly decrease left to right, so
    confidence decoding is sequential. Even positions carry a single close
    competitor while odd positions carry `n_competitors` distant ones; under a
    uniform scale below 1 the odd rows flatten faster, every even position
    overtakes every odd one, and the decode order interleaves. This realizes
    the low-scale rank-reversal case inside an end-to-end decode.
    """

    def __init__(self, vocab: Vocabulary, target: Sequence[int],
                 base_f: float = 0.1, growth: float = 0.025,
                 n_competitors: int = 8, floor_logit: float = -30.0):
        if vocab.size < n_competitors + 2:
            raise ValueError("vocabulary too small for the competitor profile")
        self.vocab = vocab
        self.target = tuple(target)
        self.base_f = base_f
        self.growth = growth
        self.n_competitors = n_competitors
        self.floor_logit = floor_logit

    def _row(self, j: int, target_tok: int) -> np.ndarray:
        row = np.full(self.vocab.size, self.floor_logit)
        top = 0.0
        row[target_tok] = top
        # f_j: the competitor mass sum(exp(-gap)) at scale 1, increasing with j
        f_j = self.base_f * (1.0 + self.growth) ** j
        if j % 2 == 0:
            gap = -math.log(f_j)
            competitors = 1
        else:
            gap = math.log(self.n_competitors) - math.log(f_j)
            competitors = self.n_competitors
        placed = 0
        for tok in range(self.vocab.size):
            if tok in (target_tok, self.vocab.mask_id):
                continue
            row[tok] = top - gap
            placed += 1
            if placed == competitors:
                break
        return row

    def logits(self, x_t: MaskedSequence) -> np.ndarray:
        if x_t.gen_length != len(self.target):
            raise ValueError("target length must equal gen_length")
        return np.vstack([self._row(j, tok) for j, tok in enumerate(self.target)])


class BigramPredictor:
    """Add-alpha bigram model over a whitespace-tokenized corpus.

    A masked position is scored against whichever neighbors are already
    unmasked: forward counts from the left neighbor (the last prompt token for
    position 0), backward counts from the right neighbor, summed in log space
    when both sides are available. With no unmasked neighbor the row falls
    back to unigram statistics. Rows are log-probabilities up to an additive
    constant, so each softmax renormalizes exactly.
    """

    def __init__(self, vocab: Vocabulary, corpus_token_ids: Sequence[Sequence[int]],
                 alpha: float = 0.1):
        self.vocab = vocab
        self.alpha = alpha
        self.unigram: Counter = Counter()
        self.bigram: Counter = Counter()
        for seq in corpus_token_ids:
            for tok in seq:
                self.unigram[tok] += 1
            for prev, nxt in zip(seq, seq[1:]):
                self.bigram[(prev, nxt)] += 1
        self._total = sum(self.unigram.values())

    @classmethod
    def from_corpus_file(cls, vocab: Vocabulary, path, token_to_id: dict[str, int],
                         alpha: float = 0.5) -> "BigramPredictor":
        sequences = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                toks = line.split()
                if toks:
                    sequences.append([token_to_id[t] for t in toks if t in token_to_id])
        return cls(vocab, sequences, alpha=alpha)

    def _forward_log(self, left: int) -> np.ndarray:
        v = self.vocab.size
        counts = np.array([self.bigram.get((left, t), 0) for t in range(v)], dtype=np.float64)
        den = self.unigram.get(left, 0) + self.alpha * v
        return np.log((counts + self.alpha) / den)

    def _backward_log(self, right: int) -> np.ndarray:
        v = self.vocab.size
        counts = np.array([self.bigram.get((t, right), 0) for t in range(v)], dtype=np.float64)
        den = self.unigram.get(right, 0) + self.alpha * v
        return np.log((counts + self.alpha) / den)

    def _unigram_log(self) -> np.ndarray:
        v = self.vocab.size
        counts = np.array([self.unigram.get(t, 0) for t in range(v)], dtype=np.float64)
        return np.log((counts + self.alpha) / (self._total + self.alpha * v))

    def _row(self, left: Optional[int], right: Optional[int]) -> np.ndarray:
        if left is None and right is None:
            row = self._unigram_log()
        else:
            row = np.zeros(self.vocab.size)
            if left is not None:
                row += self._forward_log(left)
            if right is not None:
                row += self._backward_log(right)
        row[self.vocab.mask_id] = -40.0  # the mask token is never a prediction
        return row

    def logits(self, x_t: MaskedSequence) -> np.ndarray:
        rows = []
        n = x_t.gen_length
        for j in range(n):
            if j == 0:
                left = x_t.prompt[-1] if x_t.prompt else None
            else:
                left = x_t.response[j - 1]
            right = x_t.response[j + 1] if j + 1 < n else None
            rows.append(self._row(left, right))
        return np.vstack(rows)
