"""Evaluation metrics: generation-order deviation, lexical diversity, n-gram
perplexity, and pairwise win rates."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence


def god(unmask_order: Sequence[int]) -> float:
    """Mean absolute displacement between left-to-right rank and actual unmask
    rank; 0 means purely sequential decoding, n/2 is full reversal."""
    n = len(unmask_order)
    if sorted(unmask_order) != list(range(1, n + 1)):
        raise ValueError("unmask_order must be a permutation of 1..n")
    return sum(abs((i + 1) - rank) for i, rank in enumerate(unmask_order)) / n


def distinct_n(tokens: Sequence, n: int) -> Optional[float]:
    """Distinct n-grams over total n-grams; None when the text is too short."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = len(tokens) - n + 1
    if total < 1:
        return None
    grams = {tuple(tokens[i : i + n]) for i in range(total)}
    return len(grams) / total


@dataclass
class NgramLM:
    """Add-alpha smoothed n-gram model over a closed token set."""

    order: int
    alpha: float = 0.1
    vocab: frozenset = frozenset()
    context_counts: Counter = None
    gram_counts: Counter = None

    @classmethod
    def train(cls, sequences: Sequence[Sequence], order: int = 2, alpha: float = 0.1) -> "NgramLM":
        if order < 1:
            raise ValueError("order must be >= 1")
        vocab = set()
        context_counts: Counter = Counter()
        gram_counts: Counter = Counter()
        for seq in sequences:
            toks = list(seq)
            vocab.update(toks)
            for i in range(len(toks)):
                ctx = tuple(toks[max(0, i - order + 1) : i])
                if len(ctx) == order - 1:
                    context_counts[ctx] += 1
                    gram_counts[ctx + (toks[i],)] += 1
        return cls(order=order, alpha=alpha, vocab=frozenset(vocab),
                   context_counts=context_counts, gram_counts=gram_counts)

    def log_prob(self, token, context: tuple) -> float:
        v = max(len(self.vocab), 1)
        ctx = tuple(context[-(self.order - 1):]) if self.order > 1 else ()
        num = self.gram_counts.get(ctx + (token,), 0) + self.alpha
        den = self.context_counts.get(ctx, 0) + self.alpha * v
        return math.log(num / den)


def perplexity(tokens: Sequence, lm: NgramLM) -> float:
    """exp of mean negative log-likelihood under the smoothed model."""
    toks = list(tokens)
    if not toks:
        raise ValueError("text must be non-empty")
    nll = 0.0
    for i, tok in enumerate(toks):
        nll -= lm.log_prob(tok, tuple(toks[:i]))
    return math.exp(nll / len(toks))


def win_rate(
    scores_a: Sequence[float], scores_b: Sequence[float], draw_tolerance: float = 0.0
) -> tuple[float, float, float]:
    """(a_wins %, draws %, b_wins %) over paired score lists."""
    if len(scores_a) != len(scores_b):
        raise ValueError("score lists must have equal length")
    if not scores_a:
        raise ValueError("score lists must be non-empty")
    a = d = b = 0
    for sa, sb in zip(scores_a, scores_b):
        if abs(sa - sb) <= draw_tolerance:
            d += 1
        elif sa > sb:
            a += 1
        else:
            b += 1
    n = len(scores_a)
    return (100.0 * a / n, 100.0 * d / n, 100.0 * b / n)


def god_quintile_report(samples: Sequence[tuple[float, bool]]) -> list[dict]:
    """Win rate per GOD quintile; samples are (god_value, win_flag) pairs.

    Bins hold equal counts, with any remainder going to the later bins.
    """
    if len(samples) < 5:
        raise ValueError("need at least 5 samples for quintiles")
    ordered = sorted(samples, key=lambda s: s[0])
    n = len(ordered)
    base, rem = divmod(n, 5)
    sizes = [base + (1 if i >= 5 - rem else 0) for i in range(5)]
    report = []
    start = 0
    for i, size in enumerate(sizes):
        chunk = ordered[start : start + size]
        start += size
        wins = sum(1 for _, w in chunk if w)
        report.append(
            {
                "quintile": i + 1,
                "count": size,
                "win_rate": 100.0 * wins / size,
                "god_min": chunk[0][0],
                "god_max": chunk[-1][0],
            }
        )
    return report
