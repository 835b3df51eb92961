"""Experiment machinery: task assembly, batch decoding, metric aggregation,
and report emission (JSONL traces, CSV summaries, theorem-check JSON)."""

from __future__ import annotations

import csv
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ConfigError, DecodeConfig, Vocabulary
from .engine import decode
from .metrics import NgramLM, distinct_n, god, perplexity
from .predictors import BigramPredictor, GapProfilePredictor
from .rewards import (
    ConstantReward,
    KeywordCoverageReward,
    RemoteReward,
    RewardStats,
    UNIT_STATS,
    load_stats_table,
)
from .theory import (
    check_reward_monotone,
    classify_reversal,
    gap_stats,
    grid_sweep_oracle,
    max_prob,
)

DEFAULT_SCALE_GRID = (0.01, 0.1, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)

CSV_COLUMNS = [
    "prompt_id", "strategy", "reward_scale", "god", "perplexity",
    "keyword_hits", "distinct1", "distinct2", "wall_ms",
]


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "keyword"  # keyword | synthetic-positional | freeform
    dataset: Optional[str] = None
    n_prompts: int = 50  # synthetic task only
    strategies: tuple[str, ...] = ("confidence", "rws")
    reward: str = "keyword"  # keyword | constant | baseline-equivalent | remote
    reward_value: float = 0.0  # constant reward fixture
    reward_stats: str = "Unit"
    reward_endpoint: Optional[str] = None
    reward_scale_grid: tuple[float, ...] = DEFAULT_SCALE_GRID
    steps: int = 128
    gen_length: int = 256
    block_size: int = 32
    epsilon: float = 1e-5
    guidance_frequency: int = 1
    seed: int = 0
    workers: int = 1
    out_dir: str = "out"

    def __post_init__(self):
        if self.task not in ("keyword", "synthetic-positional", "freeform"):
            raise ConfigError(f"unknown task {self.task!r}")
        if any(s <= 0 for s in self.reward_scale_grid):
            raise ConfigError("reward scale grid values must be positive")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for s in self.strategies:
            if s not in ("confidence", "rws", "temperature"):
                raise ConfigError(f"unknown strategy {s!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.reward == "remote" and not self.reward_endpoint:
            raise ConfigError("remote reward requires an endpoint")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("strategies", "reward_scale_grid"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _tokenize(text: str) -> list[str]:
    return re.findall(r"[a-z0-9']+", text.lower())


@dataclass
class RunSpec:
    prompt_id: int
    prompt_text: str
    prompt_ids: list[int]
    vocab: Vocabulary
    predictor: object
    reward: object
    reward_stats: RewardStats
    keywords: tuple[str, ...] = ()
    lm: Optional[NgramLM] = None


def load_keyword_items(path=None) -> list[dict]:
    """JSONL items with keys `prompt` and `keywords`; parse errors carry line numbers."""
    if path is None:
        text = resources.files("mdm_lab.data").joinpath("keyword_items.jsonl").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    items = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            prompt, keywords = obj["prompt"], obj["keywords"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"dataset line {lineno}: {exc}") from exc
        if not keywords:
            raise ConfigError(f"dataset line {lineno}: keywords must be non-empty")
        items.append({"prompt": prompt, "keywords": list(keywords)})
    return items


def _bundled_corpus_lines() -> list[list[str]]:
    text = resources.files("mdm_lab.data").joinpath("corpus.txt").read_text("utf-8")
    return [line.split() for line in text.splitlines() if line.strip()]


def build_text_world(items: list[dict]) -> tuple[Vocabulary, dict[str, int], BigramPredictor, NgramLM]:
    """Vocabulary, predictor, and perplexity model shared by the text tasks."""
    corpus = _bundled_corpus_lines()
    tokens = sorted({t for line in corpus for t in line}
                    | {t for item in items for t in _tokenize(item["prompt"])})
    token_to_id = {t: i for i, t in enumerate(tokens)}
    mask_id = len(tokens)
    vocab = Vocabulary(size=len(tokens) + 1, mask_id=mask_id,
                       token_text=tuple(tokens) + ("<mask>",))
    corpus_ids = [[token_to_id[t] for t in line] for line in corpus]
    predictor = BigramPredictor(vocab, corpus_ids)
    lm = NgramLM.train(corpus, order=2, alpha=0.1)
    return vocab, token_to_id, predictor, lm


def _make_reward(config: ExperimentConfig, keywords: tuple[str, ...]):
    if config.reward == "keyword":
        return KeywordCoverageReward(keywords or ("keyword",))
    if config.reward == "constant":
        return ConstantReward(config.reward_value)
    if config.reward == "baseline-equivalent":
        # sigmoid(40) rounds to exactly 1.0 in float64, so with epsilon 0 and
        # reward_scale 1 the step scale is exactly 1.0 and rws reduces to the
        # confidence baseline.
        return ConstantReward(40.0)
    if config.reward == "remote":
        return RemoteReward(config.reward_endpoint)
    raise ConfigError(f"unknown reward {config.reward!r}")


def _reward_stats(config: ExperimentConfig) -> RewardStats:
    if config.reward == "baseline-equivalent":
        return UNIT_STATS
    table = load_stats_table()
    if config.reward_stats not in table:
        raise ConfigError(f"unknown reward stats {config.reward_stats!r}")
    return table[config.reward_stats]


def build_runs(config: ExperimentConfig) -> list[RunSpec]:
    stats = _reward_stats(config)
    if config.task in ("keyword", "freeform"):
        items = load_keyword_items(config.dataset)
        vocab, token_to_id, predictor, lm = build_text_world(items)
        runs = []
        for i, item in enumerate(items):
            keywords = tuple(item["keywords"]) if config.task == "keyword" else ()
            runs.append(RunSpec(
                prompt_id=i,
                prompt_text=item["prompt"],
                prompt_ids=[token_to_id[t] for t in _tokenize(item["prompt"])],
                vocab=vocab,
                predictor=predictor,
                reward=_make_reward(config, keywords),
                reward_stats=stats,
                keywords=keywords,
                lm=lm,
            ))
        return runs
    # synthetic-positional: per-prompt gap-profile predictors over a toy vocabulary
    runs = []
    vocab = Vocabulary(size=16, mask_id=15)
    token_ids = [t for t in range(vocab.size) if t != vocab.mask_id]
    lm = NgramLM.train([[f"t{t}" for t in token_ids]], order=1, alpha=1.0)
    for i in range(config.n_prompts):
        rng = np.random.default_rng(config.seed ^ i)
        target = [int(rng.integers(0, vocab.mask_id)) for _ in range(config.gen_length)]
        predictor = GapProfilePredictor(
            vocab, target,
            base_f=float(rng.uniform(0.08, 0.12)),
            growth=float(rng.uniform(0.02, 0.03)),
        )
        runs.append(RunSpec(
            prompt_id=i,
            prompt_text=f"synthetic-{i}",
            prompt_ids=[0],
            vocab=vocab,
            predictor=predictor,
            reward=_make_reward(config, ()),
            reward_stats=stats,
            lm=lm,
        ))
    return runs


def _decode_config(config: ExperimentConfig, strategy: str, grid_point: float,
                   prompt_id: int) -> DecodeConfig:
    return DecodeConfig(
        steps=config.steps,
        gen_length=config.gen_length,
        block_size=config.block_size,
        strategy=strategy,
        reward_scale=grid_point if strategy == "rws" else 1.0,
        epsilon=config.epsilon,
        temperature=grid_point if strategy == "temperature" else 1.0,
        guidance_frequency=config.guidance_frequency,
        rng_seed=config.seed ^ prompt_id,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def execute_run(run: RunSpec, cfg: DecodeConfig) -> tuple[dict, dict]:
    """One decode run -> (CSV row dict, trace dict)."""
    start = time.perf_counter()
    tokens, trace = decode(
        run.prompt_ids, cfg, run.predictor,
        reward=run.reward if cfg.strategy == "rws" else None,
        reward_stats=run.reward_stats,
        vocab=run.vocab,
    )
    wall_ms = (time.perf_counter() - start) * 1000.0
    text_tokens = [run.vocab.text([t]) for t in tokens]
    hits = KeywordCoverageReward(run.keywords).hits(" ".join(text_tokens)) if run.keywords else 0
    row = {
        "prompt_id": run.prompt_id,
        "strategy": cfg.strategy,
        "reward_scale": cfg.temperature if cfg.strategy == "temperature" else cfg.reward_scale,
        "god": god(trace.unmask_order),
        "perplexity": perplexity(text_tokens, run.lm) if run.lm else None,
        "keyword_hits": hits,
        "distinct1": distinct_n(text_tokens, 1),
        "distinct2": distinct_n(text_tokens, 2),
        "wall_ms": wall_ms,
    }
    return row, trace.to_dict()


@dataclass
class ExperimentResult:
    rows: list[dict] = field(default_factory=list)
    csv_path: Optional[Path] = None
    traces_path: Optional[Path] = None


def _write_outputs(rows: list[dict], traces: list[dict], out_dir: Path,
                   stem: str) -> ExperimentResult:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    traces_path = out_dir / f"{stem}_traces.jsonl"
    with open(traces_path, "w", encoding="utf-8") as fh:
        for tr in traces:
            fh.write(json.dumps(tr) + "\n")
    return ExperimentResult(rows=rows, csv_path=csv_path, traces_path=traces_path)


def run_decode_experiment(config: ExperimentConfig, stem: str = "summary") -> ExperimentResult:
    """One decode per prompt x strategy x grid point; rows ordered the same way."""
    runs = build_runs(config)
    jobs = [
        (run, _decode_config(config, strategy, grid_point, run.prompt_id))
        for run in runs
        for strategy in config.strategies
        for grid_point in config.reward_scale_grid
    ]
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(lambda j: execute_run(*j), jobs))
    else:
        results = [execute_run(run, cfg) for run, cfg in jobs]
    rows = [r for r, _ in results]
    traces = [t for _, t in results]
    return _write_outputs(rows, traces, Path(config.out_dir), stem)


def run_frequency_ablation(config: ExperimentConfig, m_values: list[int],
                           stem: str = "frequency_ablation") -> Path:
    """Mean GOD and wall time per guidance frequency, same prompts and seeds."""
    if any(m < 1 for m in m_values):
        raise ConfigError("guidance frequencies must be >= 1")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "mean_god", "mean_wall_ms"])
        for m in m_values:
            cfg = replace(config, guidance_frequency=m, strategies=("rws",))
            result = run_decode_experiment(cfg, stem=f"{stem}_m{m}")
            gods = [row["god"] for row in result.rows]
            walls = [row["wall_ms"] for row in result.rows]
            writer.writerow([m, repr(sum(gods) / len(gods)), repr(sum(walls) / len(walls))])
    return path


def run_temperature_sweep(config: ExperimentConfig, temperatures: list[float],
                          stem: str = "temperature_sweep") -> Path:
    """Fixed-temperature grid over the configured task: temperature, perplexity, god."""
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{stem}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["temperature", "perplexity", "god"])
        for tau in temperatures:
            cfg = replace(config, strategies=("temperature",), reward_scale_grid=(tau,))
            result = run_decode_experiment(cfg, stem=f"{stem}_t{tau}")
            gods = [row["god"] for row in result.rows]
            ppls = [row["perplexity"] for row in result.rows if row["perplexity"] is not None]
            writer.writerow([
                repr(float(tau)),
                repr(sum(ppls) / len(ppls)) if ppls else "",
                repr(sum(gods) / len(gods)),
            ])
    return path


APPENDIX_PAIR_A = (1.1, 0.6, 0.3)
APPENDIX_PAIR_B = (1.0, 0.4, 0.4)


def sample_admissible_pair(rng: np.random.Generator, margin: float = 1e-3):
    """Random logit pair satisfying the strict ordering precondition, or None
    if the draw is near-degenerate and must be excluded."""
    d = int(rng.integers(2, 11))
    a = rng.uniform(-3.0, 3.0, d)
    b = rng.uniform(-3.0, 3.0, d)
    if max_prob(a, 1.0) < max_prob(b, 1.0):
        a, b = b, a
    sa, sb = gap_stats(a), gap_stats(b)
    if sa.delta <= 0 or sb.delta <= 0:
        return None
    if abs(sa.sigma - sb.sigma) < margin or abs(sa.delta - sb.delta) < margin:
        return None
    if not (max_prob(a, 1.0) > max_prob(b, 1.0)):
        return None
    return a, b


def verdict_agrees_with_oracle(verdict, changes: list[tuple[float, float]],
                               grid: np.ndarray) -> bool:
    """Flip presence must match, and any crossing must land within one grid
    cell of the oracle's sign-change interval. A crossing beyond the grid's
    range is consistent with the oracle seeing no change."""
    cell = float(grid[1] - grid[0])
    if verdict.case == "no_flip":
        return not changes
    if verdict.crossing is None:
        return False
    if not changes:
        return verdict.crossing > float(grid[-1]) or verdict.crossing < float(grid[0])
    if len(changes) != 1:
        return False
    lo, hi = changes[0]
    return lo - cell <= verdict.crossing <= hi + cell


def run_theory_verify(pair_count: int, seed: int = 0,
                      grid_lo: float = 1e-3, grid_hi: float = 50.0,
                      grid_points: int = 5000,
                      tilt_trials: int = 200) -> dict:
    """Classifier-vs-oracle agreement, the worked-example fixture, and tilting
    monotonicity, as one JSON-ready report."""
    if pair_count < 1:
        raise ConfigError("pair_count must be >= 1")
    rng = np.random.default_rng(seed)
    grid = np.linspace(grid_lo, grid_hi, grid_points)

    sa, sb = gap_stats(APPENDIX_PAIR_A), gap_stats(APPENDIX_PAIR_B)
    fixture_verdict = classify_reversal(APPENDIX_PAIR_A, APPENDIX_PAIR_B)
    fixture = {
        "a": list(APPENDIX_PAIR_A), "b": list(APPENDIX_PAIR_B),
        "sigma_a": sa.sigma, "delta_a": sa.delta,
        "sigma_b": sb.sigma, "delta_b": sb.delta,
        "P_a_1": max_prob(APPENDIX_PAIR_A, 1.0), "P_b_1": max_prob(APPENDIX_PAIR_B, 1.0),
        "P_a_2": max_prob(APPENDIX_PAIR_A, 2.0), "P_b_2": max_prob(APPENDIX_PAIR_B, 2.0),
        "case": fixture_verdict.case, "crossing": fixture_verdict.crossing,
    }

    checked = excluded = agreed = 0
    disagreements = []
    while checked < pair_count:
        pair = sample_admissible_pair(rng)
        if pair is None:
            excluded += 1
            continue
        a, b = pair
        checked += 1
        verdict = classify_reversal(a, b)
        changes = grid_sweep_oracle(a, b, grid)
        if verdict_agrees_with_oracle(verdict, changes, grid):
            agreed += 1
        elif len(disagreements) < 10:
            disagreements.append({
                "a": a.tolist(), "b": b.tolist(),
                "verdict": verdict.case, "crossing": verdict.crossing,
                "oracle_changes": changes,
            })

    tilt_pass = 0
    r_grid = [round(0.1 * i, 1) for i in range(101)]
    for _ in range(tilt_trials):
        n = int(rng.integers(2, 65))
        logits = rng.uniform(-3.0, 3.0, n)
        reward = rng.uniform(-2.0, 2.0, n)
        if check_reward_monotone(logits, reward, r_grid).passed:
            tilt_pass += 1

    return {
        "fixture": fixture,
        "pairs_checked": checked,
        "pairs_excluded": excluded,
        "agreement_rate": agreed / checked,
        "disagreements": disagreements,
        "tilt_trials": tilt_trials,
        "tilt_pass_rate": tilt_pass / tilt_trials,
    }


def csv_body(path, exclude: tuple[str, ...] = ("wall_ms",)) -> str:
    """CSV content with timing columns stripped, for determinism comparisons."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    header = rows[0]
    keep = [i for i, name in enumerate(header) if name not in exclude]
    out = []
    for row in rows:
        out.append(",".join(row[i] for i in keep))
    return "\n".join(out) + "\n"
