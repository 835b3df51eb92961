"""Numerical checks for the rank-reversal and reward-monotonicity results.

Everything here operates on plain logit vectors and finite distributions, with
max-subtracted softmax throughout so no raw logit is ever exponentiated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

BISECTION_TOL = 1e-8


def scaled_softmax(x, r: float) -> np.ndarray:
    """softmax(r * x), computed stably."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("logits must be finite")
    if r <= 0:
        raise ValueError("scale r must be > 0")
    z = r * x
    z -= z.max()
    e = np.exp(z)
    return e / e.sum()


def max_prob(x, r: float) -> float:
    """Largest probability of the scaled softmax; strictly increasing in r
    when the top logit is unique."""
    return float(scaled_softmax(x, r).max())


@dataclass(frozen=True)
class GapStats:
    top_index: int
    sigma: float  # sum of gaps from the top logit
    delta: float  # smallest gap
    multiplicity: int  # how many competitors sit exactly at the smallest gap


def gap_stats(x) -> GapStats:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-d vector with at least 2 entries")
    top = int(np.argmax(x))  # argmax takes the lowest index on ties
    gaps = np.delete(x[top] - x, top)
    delta = float(gaps.min())
    return GapStats(
        top_index=top,
        sigma=float(gaps.sum()),
        delta=delta,
        multiplicity=int(np.count_nonzero(gaps == delta)),
    )


@dataclass(frozen=True)
class ReversalVerdict:
    case: str  # "low_r_flip" | "high_r_flip" | "no_flip"
    crossing: Optional[float] = None


def _gap_vector(x) -> np.ndarray:
    s = gap_stats(x)
    x = np.asarray(x, dtype=np.float64)
    return np.delete(x[s.top_index] - x, s.top_index)


def _g(gaps_a: np.ndarray, gaps_b: np.ndarray, r: float) -> float:
    # g(r) = F_a(r) - F_b(r); sign(P^a - P^b) = -sign(g)
    return float(np.exp(-r * gaps_a).sum() - np.exp(-r * gaps_b).sum())


def _bisect(gaps_a, gaps_b, lo: float, hi: float) -> float:
    glo = _g(gaps_a, gaps_b, lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = _g(gaps_a, gaps_b, mid)
        if gm == 0.0 or hi - lo < BISECTION_TOL:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def classify_reversal(a, b) -> ReversalVerdict:
    """Decide whether uniform scaling ever makes b's top probability overtake a's.

    Requires the strict ordering P^a(1) > P^b(1) and a unique top logit in each
    vector; violations raise rather than silently reordering the inputs.
    """
    sa, sb = gap_stats(a), gap_stats(b)
    if sa.delta <= 0 or sb.delta <= 0:
        raise ValueError("top logit must be unique in each vector")
    if not (max_prob(a, 1.0) > max_prob(b, 1.0)):
        raise ValueError("precondition violated: need P^a(1) > P^b(1)")
    gaps_a, gaps_b = _gap_vector(a), _gap_vector(b)
    if sa.sigma < sb.sigma:
        # flatten regime: a's mass spreads faster, so b wins for small r
        lo = 1e-6
        while _g(gaps_a, gaps_b, lo) <= 0 and lo > 1e-300:
            lo /= 10.0
        return ReversalVerdict("low_r_flip", _bisect(gaps_a, gaps_b, lo, 1.0))
    if sa.delta < sb.delta:
        # sharpen regime: a's nearest competitor keeps it away from 1 longer
        hi = 2.0
        while _g(gaps_a, gaps_b, hi) < 0:
            hi *= 2.0
            if hi > 1e9:
                raise ValueError("no sign change found for the high-r flip")
        return ReversalVerdict("high_r_flip", _bisect(gaps_a, gaps_b, 1.0, hi))
    return ReversalVerdict("no_flip")


def grid_sweep_oracle(a, b, r_grid) -> list[tuple[float, float]]:
    """Brute-force oracle: grid intervals where sign(P^a(r) - P^b(r)) flips."""
    grid = np.asarray(r_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise ValueError("grid must be strictly increasing and positive")
    gaps_a, gaps_b = _gap_vector(a), _gap_vector(b)
    fa = np.exp(-np.outer(grid, gaps_a)).sum(axis=1)
    fb = np.exp(-np.outer(grid, gaps_b)).sum(axis=1)
    diff = 1.0 / (1.0 + fa) - 1.0 / (1.0 + fb)
    sign = np.sign(diff)
    idx = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    return [(float(grid[i]), float(grid[i + 1])) for i in idx]


@dataclass(frozen=True)
class TiltedDistribution:
    base_logits: tuple[float, ...]
    reward: tuple[float, ...]
    r: float

    def __post_init__(self):
        if len(self.base_logits) == 0:
            raise ValueError("support must be non-empty")
        if len(self.reward) != len(self.base_logits):
            raise ValueError("reward length must match support size")
        if self.r < 0:
            raise ValueError("tilt strength must be >= 0")


@dataclass(frozen=True)
class TiltResult:
    probs: np.ndarray
    log_partition: float  # A(r)
    mean_reward: float  # A'(r) = E_{p_r}[R]
    var_reward: float  # A''(r) = Var_{p_r}[R]


def tilt(dist: TiltedDistribution) -> TiltResult:
    """Exponentially tilt the base distribution by r * R and report A, A', A''."""
    logits = np.asarray(dist.base_logits, dtype=np.float64)
    reward = np.asarray(dist.reward, dtype=np.float64)
    w = logits + dist.r * reward
    m = w.max()
    e = np.exp(w - m)
    z = e.sum()
    p = e / z
    mean = float(p @ reward)
    var = float(p @ (reward - mean) ** 2)
    return TiltResult(probs=p, log_partition=float(m + np.log(z)), mean_reward=mean, var_reward=var)


@dataclass(frozen=True)
class MonotoneVerdict:
    passed: bool
    first_violation: Optional[tuple[float, float]] = None  # (r_prev, r_next)


def check_reward_monotone(
    base_logits: Sequence[float],
    reward: Sequence[float],
    r_grid: Sequence[float],
    var_threshold: float = 1e-8,
    slack: float = 1e-12,
) -> MonotoneVerdict:
    """Verify the expected reward is non-decreasing in the tilt strength,
    strictly so wherever the tilted reward variance is non-negligible."""
    grid = list(r_grid)
    if not grid or grid[0] != 0 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("r_grid must ascend from 0")
    prev = tilt(TiltedDistribution(tuple(base_logits), tuple(reward), grid[0]))
    for r_prev, r_next in zip(grid, grid[1:]):
        cur = tilt(TiltedDistribution(tuple(base_logits), tuple(reward), r_next))
        gain = cur.mean_reward - prev.mean_reward
        if gain < -slack:
            return MonotoneVerdict(False, (r_prev, r_next))
        if cur.var_reward > var_threshold and gain <= 0:
            return MonotoneVerdict(False, (r_prev, r_next))
        prev = cur
    return MonotoneVerdict(True)


def batch_max_prob_curves(vectors: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """P^x(r) over a grid for a batch of same-dimension logit vectors.

    Returns an array of shape (n_vectors, n_grid). Vectorized so the 10k-pair
    oracle comparison stays well under its time budget.
    """
    top = vectors.max(axis=1, keepdims=True)
    gaps = np.sort(top - vectors, axis=1)[:, 1:]  # drop the zero self-gap
    f = np.exp(-gaps[:, :, None] * grid[None, None, :]).sum(axis=1)
    return 1.0 / (1.0 + f)
