"""Reward models, z-score normalization, and the remote scorer client."""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Protocol

import requests

from .core import ConfigError, GuidanceError


class RewardModel(Protocol):
    def raw_reward(self, prompt_text: str, response_text: str) -> float:
        ...


@dataclass(frozen=True)
class RewardStats:
    mean: float
    std: float

    def __post_init__(self):
        if self.std <= 0:
            raise ConfigError("reward std must be > 0")


UNIT_STATS = RewardStats(mean=0.0, std=1.0)


def normalize(raw: float, stats: RewardStats) -> float:
    """z-score against the reward model's pre-computed calibration."""
    return (raw - stats.mean) / stats.std


def load_stats_table(path=None) -> dict[str, RewardStats]:
    """Name -> stats mapping; defaults to the bundled calibration table."""
    if path is None:
        text = resources.files("mdm_lab.data").joinpath("reward_stats.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    raw = json.loads(text)
    return {name: RewardStats(mean=v["mean"], std=v["std"]) for name, v in raw.items()}


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9']+", text.lower())


@dataclass(frozen=True)
class KeywordCoverageReward:
    """per_hit times the number of distinct anchor keywords present.

    Matching is case-insensitive on token boundaries; multi-word anchors must
    appear as a contiguous token run.
    """

    keywords: tuple[str, ...]
    per_hit: float = 1.0

    def __post_init__(self):
        if not self.keywords:
            raise ConfigError("keywords must be non-empty")

    def hits(self, response_text: str) -> int:
        toks = _tokenize(response_text)
        found = 0
        for kw in self.keywords:
            kw_toks = _tokenize(kw)
            n = len(kw_toks)
            if n and any(toks[i : i + n] == kw_toks for i in range(len(toks) - n + 1)):
                found += 1
        return found

    def raw_reward(self, prompt_text: str, response_text: str) -> float:
        return self.per_hit * self.hits(response_text)


@dataclass(frozen=True)
class ConstantReward:
    """Fixture reward: same raw score for every candidate."""

    value: float = 0.0

    def raw_reward(self, prompt_text: str, response_text: str) -> float:
        return self.value


ENDPOINT_ENV_VAR = "MDM_LAB_REWARD_ENDPOINT"


class RemoteReward:
    """Synchronous client for an external scorer.

    POSTs {"prompt", "response"} to <endpoint>/reward and expects
    {"reward": number} with status 200; anything else is a guidance error the
    engine absorbs by falling back to scale 1.0.
    """

    def __init__(self, endpoint: str, timeout: float = 5.0):
        self.endpoint = os.environ.get(ENDPOINT_ENV_VAR, endpoint).rstrip("/")
        self.timeout = timeout

    def raw_reward(self, prompt_text: str, response_text: str) -> float:
        try:
            resp = requests.post(
                f"{self.endpoint}/reward",
                json={"prompt": prompt_text, "response": response_text},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise GuidanceError(f"remote scorer unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise GuidanceError(f"remote scorer returned status {resp.status_code}")
        try:
            reward = resp.json()["reward"]
        except (ValueError, KeyError) as exc:
            raise GuidanceError(f"malformed scorer response: {exc}") from exc
        if not isinstance(reward, (int, float)):
            raise GuidanceError("scorer reward is not numeric")
        return float(reward)
