"""Shared domain types: vocabularies, masked sequences, decode configuration, traces."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Optional, Sequence

import numpy as np

MASK = None  # sentinel for a still-masked response slot


class ConfigError(Exception):
    """Invalid experiment or decode configuration."""


class DecodeError(Exception):
    """Decode run could not be completed (e.g. predictor failure)."""


class GuidanceError(Exception):
    """Reward guidance failed for one step; the engine falls back to scale 1.0."""


@dataclass(frozen=True)
class Vocabulary:
    size: int
    mask_id: int
    token_text: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"vocabulary size must be positive, got {self.size}")
        if not (0 <= self.mask_id < self.size):
            raise ValueError(f"mask_id {self.mask_id} outside 0..{self.size - 1}")
        if self.token_text is not None and len(self.token_text) != self.size:
            raise ValueError("token_text length must equal vocabulary size")

    def text(self, token_ids: Sequence[int], sep: str = " ") -> str:
        """Decode token ids to text; ids without a text table render as t<id>."""
        if self.token_text is None:
            return sep.join(f"t{i}" for i in token_ids)
        return sep.join(self.token_text[i] for i in token_ids)


@dataclass
class MaskedSequence:
    """Prompt plus response slots at diffusion step `step`; MASK marks unfilled slots."""

    prompt: tuple[int, ...]
    response: list[Optional[int]]
    step: int

    @property
    def gen_length(self) -> int:
        return len(self.response)

    def masked_positions(self) -> list[int]:
        return [i for i, tok in enumerate(self.response) if tok is MASK]

    def is_complete(self) -> bool:
        return not any(tok is MASK for tok in self.response)


@dataclass(frozen=True)
class DecodeConfig:
    steps: int = 128
    gen_length: int = 256
    block_size: int = 32
    strategy: str = "confidence"  # confidence | rws | temperature
    reward_scale: float = 1.0
    epsilon: float = 1e-5
    temperature: float = 1.0
    guidance_frequency: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.gen_length < 1:
            raise ConfigError("gen_length must be >= 1")
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        if self.strategy not in ("confidence", "rws", "temperature"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.reward_scale <= 0:
            raise ConfigError("reward_scale must be > 0")
        if self.epsilon < 0:
            raise ConfigError("epsilon must be >= 0")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if self.guidance_frequency < 1:
            raise ConfigError("guidance_frequency must be >= 1")
        n_blocks = -(-self.gen_length // self.block_size)
        if self.steps < n_blocks:
            raise ConfigError(
                f"steps ({self.steps}) must cover every block (need >= {n_blocks})"
            )


@dataclass
class StepRecord:
    step: int
    scale_factor: float
    unmasked_positions: list[tuple[int, int, float]]  # (position, token id, confidence)
    raw_reward: Optional[float] = None
    normalized_reward: Optional[float] = None
    error: Optional[str] = None


@dataclass
class DecodeTrace:
    config: DecodeConfig
    step_records: list[StepRecord] = field(default_factory=list)

    @property
    def unmask_order(self) -> list[int]:
        return derive_unmask_order(self)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "steps": [
                {
                    "step": r.step,
                    "raw_reward": r.raw_reward,
                    "normalized_reward": r.normalized_reward,
                    "scale_factor": r.scale_factor,
                    "unmasked_positions": [list(u) for u in r.unmasked_positions],
                    "error": r.error,
                }
                for r in self.step_records
            ],
            "unmask_order": self.unmask_order,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "DecodeTrace":
        trace = cls(config=DecodeConfig(**d["config"]))
        for r in d["steps"]:
            trace.step_records.append(
                StepRecord(
                    step=r["step"],
                    scale_factor=r["scale_factor"],
                    unmasked_positions=[
                        (int(p), int(t), float(c)) for p, t, c in r["unmasked_positions"]
                    ],
                    raw_reward=r.get("raw_reward"),
                    normalized_reward=r.get("normalized_reward"),
                    error=r.get("error"),
                )
            )
        return trace

    @classmethod
    def from_json(cls, s: str) -> "DecodeTrace":
        return cls.from_dict(json.loads(s))


def derive_unmask_order(trace: DecodeTrace) -> list[int]:
    """1-based unmask rank per response position.

    Earlier steps get smaller ranks; within one step, ties break by ascending
    position index so that GOD values are reproducible.
    """
    n = trace.config.gen_length
    order: list[int] = []
    seen: set[int] = set()
    for record in trace.step_records:
        for pos, _tok, _conf in sorted(record.unmasked_positions):
            if pos in seen:
                raise ValueError(f"position {pos} unmasked twice")
            seen.add(pos)
            order.append(pos)
    if len(order) != n or seen != set(range(n)):
        missing = sorted(set(range(n)) - seen)
        raise ValueError(f"incomplete trace: positions never unmasked: {missing}")
    ranks = [0] * n
    for rank, pos in enumerate(order, start=1):
        ranks[pos] = rank
    return ranks


def as_logit_matrix(rows, gen_length: int, vocab_size: int) -> np.ndarray:
    """Validate and return an (L', V) float64 logit matrix."""
    mat = np.asarray(rows, dtype=np.float64)
    if mat.shape != (gen_length, vocab_size):
        raise ValueError(f"logit matrix shape {mat.shape} != ({gen_length}, {vocab_size})")
    if not np.all(np.isfinite(mat)):
        raise ValueError("logit matrix contains non-finite entries")
    return mat
