"""Command-line experiment runner."""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from .core import ConfigError
from .runner import (
    ExperimentConfig,
    run_decode_experiment,
    run_frequency_ablation,
    run_temperature_sweep,
    run_theory_verify,
)

EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2


def _load_config(config_path, seed, out, workers, strategy, reward_scale) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(config_path) if config_path else ExperimentConfig()
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if out is not None:
        overrides["out_dir"] = out
    if workers is not None:
        overrides["workers"] = workers
    if strategy is not None:
        overrides["strategies"] = (strategy,)
    if reward_scale is not None:
        overrides["reward_scale_grid"] = (reward_scale,)
    return replace(cfg, **overrides) if overrides else cfg


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(exists=True),
                      help="JSON experiment config.")(fn)
    fn = click.option("--seed", type=int, default=None)(fn)
    fn = click.option("--out", type=click.Path(), default=None)(fn)
    fn = click.option("--workers", type=int, default=None)(fn)
    fn = click.option("--strategy", type=str, default=None)(fn)
    fn = click.option("--reward-scale", type=float, default=None)(fn)
    return fn


def _run(fn):
    try:
        fn()
    except ConfigError as exc:
        click.echo(f"configuration error: {exc}", err=True)
        sys.exit(EXIT_CONFIG_ERROR)
    except Exception as exc:  # partial output may already be on disk
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(EXIT_RUNTIME_ERROR)


@click.group()
def main():
    """Masked-diffusion decoding laboratory."""


@main.command()
@_common_options
def decode(config_path, seed, out, workers, strategy, reward_scale):
    """Batch-decode the configured task and emit summary CSV plus traces."""
    def go():
        cfg = _load_config(config_path, seed, out, workers, strategy, reward_scale)
        result = run_decode_experiment(cfg)
        click.echo(f"wrote {result.csv_path} ({len(result.rows)} rows)")
        click.echo(f"wrote {result.traces_path}")
    _run(go)


@main.command("ablate-frequency")
@_common_options
@click.option("--frequencies", "-m", default="1,2,4", show_default=True,
              help="Comma-separated guidance frequencies.")
def ablate_frequency(config_path, seed, out, workers, strategy, reward_scale, frequencies):
    """Reward-guidance frequency ablation: mean GOD and wall time per m."""
    def go():
        cfg = _load_config(config_path, seed, out, workers, strategy, reward_scale)
        try:
            m_values = [int(m) for m in frequencies.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad frequency list {frequencies!r}") from exc
        path = run_frequency_ablation(cfg, m_values)
        click.echo(f"wrote {path}")
    _run(go)


@main.command("sweep-temperature")
@_common_options
@click.option("--temperatures", default="0.01,0.1,1,2,4,8,16,32", show_default=True)
def sweep_temperature(config_path, seed, out, workers, strategy, reward_scale, temperatures):
    """Fixed multiplicative temperature sweep; emits temperature, perplexity, god."""
    def go():
        cfg = _load_config(config_path, seed, out, workers, strategy, reward_scale)
        try:
            taus = [float(t) for t in temperatures.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad temperature list {temperatures!r}") from exc
        path = run_temperature_sweep(cfg, taus)
        click.echo(f"wrote {path}")
    _run(go)


@main.command("theory-verify")
@click.option("--pairs", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), default=None, help="Report path (default stdout).")
def theory_verify(pairs, seed, out):
    """Rank-reversal classifier vs. brute-force oracle, plus tilting checks."""
    def go():
        report = run_theory_verify(pairs, seed=seed)
        text = json.dumps(report, indent=2)
        if out:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            Path(out).write_text(text + "\n", encoding="utf-8")
            click.echo(f"wrote {out}")
        else:
            click.echo(text)
        click.echo(
            f"agreement {100 * report['agreement_rate']:.2f}% over "
            f"{report['pairs_checked']} pairs "
            f"({report['pairs_excluded']} excluded as near-degenerate)",
            err=True,
        )
    _run(go)


if __name__ == "__main__":
    main()
