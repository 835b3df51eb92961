"""Masked-diffusion decoding laboratory.

Reward-weighted sampling next to confidence and temperature baselines, toy
mask predictors, generation-order metrics, and numerical verification of the
rank-reversal and reward-monotonicity results.
"""

from .core import (
    ConfigError,
    DecodeConfig,
    DecodeError,
    DecodeTrace,
    GuidanceError,
    MaskedSequence,
    StepRecord,
    Vocabulary,
    derive_unmask_order,
)
from .engine import decode, forward_mask, schedule_k
from .metrics import NgramLM, distinct_n, god, god_quintile_report, perplexity, win_rate
from .predictors import (
    BigramPredictor,
    GapProfilePredictor,
    PositionalBiasPredictor,
    ScriptedPredictor,
)
from .rewards import (
    ConstantReward,
    KeywordCoverageReward,
    RemoteReward,
    RewardStats,
    load_stats_table,
    normalize,
)
from .theory import (
    GapStats,
    ReversalVerdict,
    TiltedDistribution,
    check_reward_monotone,
    classify_reversal,
    gap_stats,
    grid_sweep_oracle,
    max_prob,
    scaled_softmax,
    tilt,
)

__version__ = "0.1.0"
