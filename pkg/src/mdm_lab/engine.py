"""Forward masking and the reverse-diffusion decode loop.

Three selection strategies share one loop: plain confidence, reward-weighted
scaling (one positive scalar per step derived from the candidate's normalized
reward), and fixed multiplicative temperature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    MASK,
    DecodeConfig,
    DecodeError,
    DecodeTrace,
    GuidanceError,
    MaskedSequence,
    StepRecord,
    Vocabulary,
)
from .predictors import MaskPredictor
from .rewards import RewardModel, RewardStats, UNIT_STATS, normalize


def forward_mask(x0, t: int, horizon: int, rng: np.random.Generator) -> list:
    """Mask each token independently with probability t / horizon."""
    if not (0 <= t <= horizon):
        raise ValueError(f"t must be in 0..{horizon}, got {t}")
    if t == 0:
        return list(x0)
    if t == horizon:
        return [MASK] * len(x0)
    p = t / horizon
    return [MASK if rng.random() < p else tok for tok in x0]


def schedule_k(remaining_masked: int, remaining_steps: int) -> int:
    """Tokens to unmask this step: ceil division spreads the remaining masks
    over the remaining steps and always finishes on time."""
    if remaining_steps < 1:
        raise ValueError("remaining_steps must be >= 1")
    return -(-remaining_masked // remaining_steps)


def predict_full(x_t: MaskedSequence, predictor: MaskPredictor) -> tuple[np.ndarray, list[int]]:
    """Greedy candidate completion: argmax per masked slot, existing tokens kept.

    Argmax ties break toward the lowest token id.
    """
    logits = np.asarray(predictor.logits(x_t), dtype=np.float64)
    if logits.shape[0] != x_t.gen_length:
        raise DecodeError(f"predictor returned {logits.shape[0]} rows for L'={x_t.gen_length}")
    if not np.all(np.isfinite(logits)):
        raise DecodeError("predictor returned non-finite logits")
    candidate = []
    for j, tok in enumerate(x_t.response):
        candidate.append(int(np.argmax(logits[j])) if tok is MASK else tok)
    return logits, candidate


@dataclass
class SelectionOutcome:
    chosen: list[tuple[int, int, float]]  # (position, token id, confidence)
    candidate: list[int]


def _row_confidences(logits: np.ndarray, positions: list[int]) -> list[float]:
    confs = []
    for j in positions:
        row = logits[j]
        z = row - row.max()
        e = np.exp(z)
        confs.append(float(e.max() / e.sum()))
    return confs


def select_confidence(
    logits: np.ndarray, masked: list[int], k: int, candidate: Optional[list[int]] = None
) -> SelectionOutcome:
    """Top-k masked positions by max-softmax confidence; ties break by
    ascending position index."""
    if k > len(masked):
        raise ValueError(f"k={k} exceeds {len(masked)} masked positions")
    positions = sorted(masked)
    confs = _row_confidences(logits, positions)
    ranked = sorted(zip(positions, confs), key=lambda pc: (-pc[1], pc[0]))
    chosen = [
        (pos, int(np.argmax(logits[pos])), conf) for pos, conf in ranked[:k]
    ]
    if candidate is None:
        candidate = [int(np.argmax(logits[j])) for j in range(logits.shape[0])]
    return SelectionOutcome(chosen=chosen, candidate=candidate)


def reward_scale_factor(r_norm: float, s_r: float, epsilon: float) -> float:
    """s_R * sqrt(sigmoid(r) + epsilon): the per-step multiplicative scale."""
    if s_r <= 0:
        raise ValueError("reward scale must be > 0")
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if not math.isfinite(r_norm):
        raise GuidanceError(f"non-finite normalized reward: {r_norm}")
    sigmoid = 1.0 / (1.0 + math.exp(-r_norm)) if r_norm > -700 else 0.0
    return s_r * math.sqrt(sigmoid + epsilon)


def apply_reward_scale(logits: np.ndarray, r_norm: float, s_r: float, epsilon: float) -> np.ndarray:
    """Multiply every entry by the same positive scalar; argmaxes are unchanged."""
    return logits * reward_scale_factor(r_norm, s_r, epsilon)


def apply_temperature(logits: np.ndarray, tau: float) -> np.ndarray:
    if tau <= 0:
        raise ValueError("temperature must be > 0")
    return logits * tau


def _block_layout(gen_length: int, block_size: int, steps: int) -> list[tuple[range, int]]:
    """(positions, steps) per block; steps distributed proportionally to block
    size so the total is exactly `steps` and every block gets at least one."""
    blocks = [range(s, min(s + block_size, gen_length)) for s in range(0, gen_length, block_size)]
    layout = []
    steps_left, positions_left = steps, gen_length
    for block in blocks:
        share = -(-steps_left * len(block) // positions_left)
        layout.append((block, share))
        steps_left -= share
        positions_left -= len(block)
    return layout


def decode(
    prompt: list[int],
    config: DecodeConfig,
    predictor: MaskPredictor,
    reward: Optional[RewardModel] = None,
    reward_stats: RewardStats = UNIT_STATS,
    vocab: Optional[Vocabulary] = None,
) -> tuple[list[int], DecodeTrace]:
    """Run the full reverse process and return the response plus its trace.

    Block-wise: each block of positions is fully unmasked before the next one
    starts. With the rws strategy, every guidance_frequency-th step scores the
    greedy candidate, normalizes the reward, and scales all logits by one
    positive scalar before selection; other steps (and reward failures) use
    scale 1.0.
    """
    if config.strategy == "rws" and reward is None:
        raise DecodeError("rws strategy requires a reward model")
    if config.strategy != "rws" and reward is not None:
        raise DecodeError(f"strategy {config.strategy!r} does not take a reward model")
    vocab = vocab or getattr(predictor, "vocab", None)
    if vocab is None:
        raise DecodeError("a vocabulary is required to decode candidate text")

    x = MaskedSequence(prompt=tuple(prompt), response=[MASK] * config.gen_length,
                       step=config.steps)
    trace = DecodeTrace(config=config)
    prompt_text = vocab.text(prompt)
    t = config.steps
    step_index = 0  # counts executed steps: 0 at t = T

    for block, block_steps in _block_layout(config.gen_length, config.block_size, config.steps):
        for local_step in range(block_steps):
            logits, candidate = predict_full(x, predictor)

            raw = norm = None
            error = None
            scale = 1.0
            if config.strategy == "rws":
                if step_index % config.guidance_frequency == 0:
                    try:
                        raw = reward.raw_reward(prompt_text, vocab.text(candidate))
                        norm = normalize(raw, reward_stats)
                        scale = reward_scale_factor(norm, config.reward_scale, config.epsilon)
                    except GuidanceError as exc:
                        raw = norm = None
                        scale = 1.0
                        error = str(exc)
            elif config.strategy == "temperature":
                scale = config.temperature

            scaled = logits if scale == 1.0 else logits * scale
            masked_in_block = [j for j in block if x.response[j] is MASK]
            k = schedule_k(len(masked_in_block), block_steps - local_step)
            if k > 0:
                outcome = select_confidence(scaled, masked_in_block, k, candidate=candidate)
                for pos, tok, _conf in outcome.chosen:
                    x.response[pos] = tok
            else:
                outcome = SelectionOutcome(chosen=[], candidate=candidate)

            t -= 1
            x.step = t
            step_index += 1
            trace.step_records.append(
                StepRecord(
                    step=t + 1,
                    scale_factor=scale,
                    unmasked_positions=outcome.chosen,
                    raw_reward=raw,
                    normalized_reward=norm,
                    error=error,
                )
            )

    if not x.is_complete():
        raise DecodeError("decode finished with masked positions remaining")
    return list(x.response), trace
