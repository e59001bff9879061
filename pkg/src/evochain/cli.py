"""Batch front end: evolve, enumerate, audit recovery, baseline, and sweep.

Every subcommand takes a JSON config (--config), writes its artifacts under
--out, and finishes with a manifest that embeds the resolved config; passing
that manifest back as --config replays the run and reproduces the output
files byte for byte.  Exit codes: 0 success, 1 runtime failure (including
an oversized enumeration), 2 config or usage errors.
"""

from __future__ import annotations

import itertools
import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np
from scipy import stats

from .chain import StagePlan, train_chain
from .chromosome import Chromosome
from .config import (
    ConfigError,
    RunConfig,
    build_dataset,
    config_hash,
    load_config,
    manifest_dict,
)
from .evolution import GaConfig, run
from .objectives import ChainEvaluator, measure
from .oracle import (
    EnumerationCapError,
    FRONT_FORMAT_VERSION,
    global_front,
    load_front,
    save_front,
    track_recovery,
)

__all__ = ["main"]


def _fail(code: int, message: str) -> None:
    click.echo(message, err=True)
    sys.exit(code)


def _load(config_path: str, seed_spec: str | None) -> tuple[RunConfig, object]:
    """Config + dataset, or exit 2 before any output file is touched."""
    try:
        cfg = load_config(config_path)
        if seed_spec is not None:
            cfg.seeds = _parse_seeds(seed_spec)
        dataset = build_dataset(cfg)
    except ConfigError as err:
        _fail(2, f"config error: {err}")
    return cfg, dataset


def _parse_seeds(spec: str) -> list[int]:
    try:
        return [int(part) for part in str(spec).split(",") if part.strip() != ""]
    except ValueError:
        raise ConfigError(f"--seed expects an integer or comma list, got {spec!r}")


def _stage_cap(cfg: RunConfig, n_features: int) -> int:
    """Stage limit for enumeration: the explicit setting (where a one-stage
    space is legal) or the search default formula."""
    if cfg.max_stages is not None:
        if not 1 <= cfg.max_stages <= n_features:
            raise ConfigError(
                f"{cfg.source}: max_stages must lie in [1, {n_features}], got {cfg.max_stages}"
            )
        return cfg.max_stages
    return GaConfig().resolved(n_features).max_stages


def _mean_and_margin(values: list[float]) -> tuple[float, float]:
    """Sample mean with a 95% t-interval half-width (0 for a single run)."""
    arr = np.asarray(values, dtype=np.float64)
    if len(arr) < 2:
        return float(arr.mean()), 0.0
    margin = stats.t.ppf(0.975, len(arr) - 1) * arr.std(ddof=1) / math.sqrt(len(arr))
    return float(arr.mean()), float(margin)


def _write_manifest(out_dir: Path, cfg: RunConfig, command: str, outputs: dict, t0: float) -> None:
    payload = manifest_dict(cfg, command, outputs, time.perf_counter() - t0)
    (out_dir / "manifest.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _front_rank_fitness(result) -> tuple[list[int], list[float]]:
    ranks, fits = [], []
    for chromosome, _ in result.front:
        i = result.final.chromosomes.index(chromosome)
        ranks.append(result.final.ranks[i])
        fits.append(result.final.fitness[i])
    return ranks, fits


def config_option(fn):
    fn = click.option(
        "--config", "config_path", required=True, type=click.Path(), help="JSON run config or a previous run's manifest."
    )(fn)
    return click.option(
        "--out", "out_dir", default="evochain-out", type=click.Path(file_okay=False), help="Output directory (created if missing)."
    )(fn)


def seed_option(fn):
    return click.option(
        "--seed", "seed_spec", default=None, help="Override config seeds: one integer or a comma list."
    )(fn)


def threads_option(fn):
    return click.option(
        "--threads", default=1, type=click.IntRange(min=1), help="Worker processes for chromosome evaluation (1 = sequential reference)."
    )(fn)


@click.group()
def main() -> None:
    """Evolve budgeted early-exit classifier chains and audit the results."""


@main.command()
@config_option
@seed_option
@threads_option
def evolve(config_path, out_dir, seed_spec, threads) -> None:
    """Run the search once per seed; write per-seed fronts and an aggregate."""
    cfg, dataset = _load(config_path, seed_spec)
    chash = config_hash(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    search_eval = ChainEvaluator.from_dataset(
        dataset, cfg.threshold, split="val", workers=threads
    )
    report_eval = ChainEvaluator.from_dataset(dataset, cfg.threshold, split="test")
    front_files = []
    seed_rows = []
    try:
        for s in cfg.seeds:
            result = run(cfg.ga_config(s), search_eval)
            ranks, fits = _front_rank_fitness(result)
            front_path = out / f"front-seed{s}.csv"
            save_front(front_path, result.front, config_hash=chash, ranks=ranks, fitness=fits)
            front_files.append(front_path.name)
            best, _ = result.best()
            on_test = report_eval.evaluate(best)
            seed_rows.append(
                (s, str(best), on_test.coverage, on_test.accuracy, on_test.raw_cost,
                 result.halt_reason, result.n_generations)
            )
    finally:
        search_eval.close()

    lines = [
        f"# evochain-seeds v{FRONT_FORMAT_VERSION} config={chash}",
        "seed,chromosome,coverage,accuracy,raw_cost,halt_reason,generations",
    ]
    for s, genes, cov, acc, cost, halt, gens in seed_rows:
        lines.append(f"{s},{genes},{cov!r},{acc!r},{cost!r},{halt},{gens}")
    (out / "seeds.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    agg_lines = [
        f"# evochain-aggregate v{FRONT_FORMAT_VERSION} config={chash} seeds={len(cfg.seeds)}",
        "metric,mean,margin95",
    ]
    for name, column in (("coverage", 2), ("accuracy", 3), ("raw_cost", 4)):
        mean, margin = _mean_and_margin([row[column] for row in seed_rows])
        agg_lines.append(f"{name},{mean!r},{margin!r}")
    (out / "aggregate.csv").write_text("\n".join(agg_lines) + "\n", encoding="utf-8")

    _write_manifest(
        out, cfg, "evolve",
        {"fronts": front_files, "seeds": "seeds.csv", "aggregate": "aggregate.csv"},
        t0,
    )
    click.echo(
        f"{len(cfg.seeds)} run(s) complete; test-split means in {out / 'aggregate.csv'}"
    )


@main.command()
@config_option
@threads_option
def oracle(config_path, out_dir, threads) -> None:
    """Exhaustively evaluate the search space and persist the exact front."""
    cfg, dataset = _load(config_path, None)
    chash = config_hash(cfg)
    try:
        stages = _stage_cap(cfg, dataset.n_features)
    except ConfigError as err:
        _fail(2, f"config error: {err}")
    t0 = time.perf_counter()
    evaluator = ChainEvaluator.from_dataset(
        dataset, cfg.threshold, split="val", workers=threads
    )
    try:
        front = global_front(
            evaluator, dataset.n_features, stages, cap=cfg.oracle_cap
        )
    except EnumerationCapError as err:
        _fail(1, str(err))
    finally:
        evaluator.close()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_front(out / "oracle-front.csv", front.members, config_hash=chash)
    _write_manifest(out, cfg, "oracle", {"front": "oracle-front.csv"}, t0)
    click.echo(
        f"{front.total_evaluated} solutions evaluated (n={dataset.n_features}, "
        f"k={stages}); Pareto front holds {len(front)}"
    )


@main.command()
@config_option
@seed_option
@threads_option
def recovery(config_path, out_dir, seed_spec, threads) -> None:
    """Track how much of a saved oracle front each generation rediscovers."""
    cfg, dataset = _load(config_path, seed_spec)
    chash = config_hash(cfg)
    out = Path(out_dir)
    if cfg.recovery_front is not None:
        front_path = Path(cfg.recovery_front)
        if not front_path.is_absolute():
            front_path = Path(cfg.source).parent / front_path
    else:
        front_path = out / "oracle-front.csv"
    if not front_path.exists():
        _fail(2, f"oracle front file not found: {front_path} (run the oracle subcommand first)")
    try:
        front = load_front(front_path)
    except ValueError as err:
        _fail(2, f"config error: {err}")

    t0 = time.perf_counter()
    evaluator = ChainEvaluator.from_dataset(
        dataset, cfg.threshold, split="val", workers=threads
    )
    try:
        traces = [
            track_recovery(run(cfg.ga_config(s), evaluator), front) for s in cfg.seeds
        ]
    finally:
        evaluator.close()
    # runs halt at different generations; carry each final count forward
    length = max(len(t) for t in traces)
    padded = [t + [t[-1]] * (length - len(t)) for t in traces]
    out.mkdir(parents=True, exist_ok=True)
    header = ",".join(["generation", "mean_recovery"] + [f"seed{s}" for s in cfg.seeds])
    lines = [
        f"# evochain-recovery v{FRONT_FORMAT_VERSION} config={chash} front_size={len(front)}",
        header,
    ]
    for h in range(length):
        counts = [p[h] for p in padded]
        mean = float(np.mean(counts))
        lines.append(",".join([str(h), repr(mean)] + [str(c) for c in counts]))
    (out / "recovery.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, cfg, "recovery", {"table": "recovery.csv"}, t0)
    final_mean = float(np.mean([p[-1] for p in padded]))
    click.echo(
        f"{len(cfg.seeds)} run(s); mean final recovery {final_mean:g} of {len(front)} front members"
    )


@main.command()
@config_option
@click.option(
    "--which",
    type=click.Choice(["single-stage", "cost-ordered-T"]),
    default="single-stage",
    show_default=True,
    help="single-stage: all features in one classifier; cost-ordered-T: one stage per cost class, cheapest first.",
)
def baseline(config_path, out_dir, which) -> None:
    """Train a fixed heuristic pipeline and measure it on the test split."""
    cfg, dataset = _load(config_path, None)
    if which == "cost-ordered-T":
        if cfg.costs.mode == "explicit":
            _fail(2, "config error: cost-ordered-T needs a class-based cost schedule")
        # stage index = dense rank of the feature's cost, cheapest class first
        unique_costs = sorted(set(dataset.costs.tolist()))
        stage_of = {c: i for i, c in enumerate(unique_costs)}
        genes = tuple(stage_of[c] for c in dataset.costs.tolist())
    else:
        genes = (0,) * dataset.n_features
    chromosome = Chromosome(genes)
    t0 = time.perf_counter()
    chain = train_chain(
        StagePlan.from_chromosome(chromosome),
        dataset.X_train,
        dataset.y_train,
        dataset.costs,
        threshold=cfg.threshold,
    )
    obj = measure(chain, dataset.X_test, dataset.y_test).with_inverse(1.0)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_front(out / "baseline.csv", [(chromosome, obj)], config_hash=config_hash(cfg))
    _write_manifest(out, cfg, f"baseline:{which}", {"result": "baseline.csv"}, t0)
    click.echo(
        f"{which} baseline {chromosome}: coverage {obj.coverage:.4f}, "
        f"accuracy {obj.accuracy:.4f}, mean cost {obj.raw_cost:.4f} "
        f"(full acquisition {dataset.total_cost:g})"
    )


_SWEEP_ORDER = (
    "population_size",
    "mutation_rate",
    "crossover_rate",
    "mutation_bias",
    "elitism_fraction",
)


def sweep_score(objectives, total_cost: float) -> float:
    """Tuning score with a population-independent cost term:
    sqrt(g1^2 + g2^2 + (1 - raw_cost / total acquisition cost)^2)."""
    return math.sqrt(
        objectives.coverage**2
        + objectives.accuracy**2
        + (1.0 - objectives.raw_cost / total_cost) ** 2
    )


def _sweep_sort_key(row):
    """Highest score first; ties prefer fewer evaluations (smaller
    population), then the lexicographically smallest combination."""
    combo, population, score, _ = row
    return (-score, population, combo)


@main.command()
@config_option
@seed_option
@threads_option
def sweep(config_path, out_dir, seed_spec, threads) -> None:
    """Grid-search GA settings by short validation runs; report the best."""
    cfg, dataset = _load(config_path, seed_spec)
    chash = config_hash(cfg)
    keys = [k for k in _SWEEP_ORDER if k in cfg.sweep]
    if not keys:
        _fail(2, f"config error: {cfg.source}: sweep grid is empty")
    short_iter = cfg.sweep.get("max_iter", 20)
    total_cost = dataset.total_cost
    t0 = time.perf_counter()
    evaluator = ChainEvaluator.from_dataset(
        dataset, cfg.threshold, split="val", workers=threads
    )
    rows = []
    try:
        for combo in itertools.product(*(cfg.sweep[k] for k in keys)):
            ga_kwargs = dict(cfg.ga)
            ga_kwargs.update(zip(keys, combo))
            ga_kwargs["max_iter"] = short_iter
            try:
                ga_cfg = GaConfig(
                    rng_seed=cfg.seeds[0], max_stages=cfg.max_stages, **ga_kwargs
                )
                result = run(ga_cfg, evaluator)
            except (TypeError, ValueError) as err:
                _fail(2, f"config error: sweep combination {dict(zip(keys, combo))}: {err}")
            _, best_obj = result.best()
            score = sweep_score(best_obj, total_cost)
            population = ga_kwargs.get("population_size", GaConfig().population_size)
            rows.append((combo, population, score, best_obj))
    finally:
        evaluator.close()

    rows.sort(key=_sweep_sort_key)
    best_combo, _, best_score, best_obj = rows[0]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [
        f"# evochain-sweep v{FRONT_FORMAT_VERSION} config={chash} max_iter={short_iter}",
        ",".join(list(keys) + ["score", "coverage", "accuracy", "raw_cost"]),
    ]
    for combo, _, score, obj in rows:
        lines.append(
            ",".join(
                [str(v) for v in combo]
                + [repr(score), repr(obj.coverage), repr(obj.accuracy), repr(obj.raw_cost)]
            )
        )
    (out / "sweep.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_manifest(out, cfg, "sweep", {"table": "sweep.csv"}, t0)
    click.echo(
        "best settings "
        + json.dumps(dict(zip(keys, best_combo)))
        + f" score {best_score:.4f}"
    )


if __name__ == "__main__":
    main()
