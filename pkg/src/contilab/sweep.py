"""Declarative experiment configs and seeded Monte Carlo sweeps.

A sweep runs ``trials`` independent trajectories per config cell. Trial i of
a cell draws its stream id from a content hash of the cell's (env, agent,
horizon) spec plus i, so cell results are bit-identical under grid
permutation, worker count, and scheduling order.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from .agents import build_agent
from .core import TrajectorySummary, run_trajectory
from .envs import build_env
from .errors import ConfigurationError
from .rng import RngStream

_Z95 = 1.959963984540054


@dataclass
class ExperimentConfig:
    """One experiment cell (or a sweep template when ``sweep`` is nonempty).

    ``sweep`` maps dotted parameter paths ("agent.alpha", "env.eta",
    "horizon") to value lists; :meth:`expand` produces the Cartesian product
    of cells with ``coords`` recording each cell's coordinates.
    """

    experiment_name: str
    env: dict
    agent: dict
    horizon: int
    trials: int = 1
    seed: int = 0
    sweep: dict = field(default_factory=dict)
    coords: dict = field(default_factory=dict)
    out_dir: str | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigurationError(f"horizon must be >= 1, got {self.horizon}")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")

    def canonical_key(self) -> str:
        """Content hash input: stable JSON of everything that defines a cell."""
        return json.dumps(
            {"env": self.env, "agent": self.agent, "horizon": self.horizon},
            sort_keys=True, separators=(",", ":"),
        )

    def _apply(self, dotted: str, value) -> "ExperimentConfig":
        if dotted == "horizon":
            return replace(self, horizon=int(value))
        section, _, key = dotted.partition(".")
        if section == "env" and key in self.env:
            return replace(self, env={**self.env, key: value})
        if section == "agent" and key in self.agent:
            return replace(self, agent={**self.agent, key: value})
        raise ConfigurationError(
            f"sweep axis {dotted!r} does not name an existing env/agent parameter"
        )

    def expand(self) -> list["ExperimentConfig"]:
        if not self.sweep:
            return [self]
        axes = list(self.sweep.items())
        cells = []
        for values in itertools.product(*(vals for _, vals in axes)):
            cfg = replace(self, sweep={}, coords=dict(self.coords))
            for (name, _), value in zip(axes, values):
                cfg = cfg._apply(name, value)
                cfg.coords[name] = value
            cells.append(cfg)
        return cells


@dataclass
class TrialResult:
    index: int
    summary: TrajectorySummary | None
    error: str | None = None


@dataclass
class SweepRow:
    """One (cell coordinates, metric) aggregate of a Monte Carlo sweep."""

    coords: dict
    metric: str
    mean: float
    std: float
    ci95: float
    trials: int
    error: str | None = None


@dataclass
class SweepTable:
    rows: list[SweepRow]

    def select(self, metric: str, **coords) -> list[SweepRow]:
        out = []
        for row in self.rows:
            if row.metric != metric:
                continue
            if all(row.coords.get(k) == v for k, v in coords.items()):
                out.append(row)
        return out

    def best_row(self, metric: str, maximize: bool = True, **coords) -> SweepRow:
        rows = [r for r in self.select(metric, **coords) if math.isfinite(r.mean)]
        if not rows:
            raise ValueError(f"no finite rows for metric {metric!r}")
        return max(rows, key=lambda r: r.mean) if maximize else min(rows, key=lambda r: r.mean)


def resolve_workers(requested: int | None = None) -> int:
    """Worker count: explicit request, else cpu count, capped by CONTILAB_THREADS."""
    workers = requested if requested else (os.cpu_count() or 1)
    cap = os.environ.get("CONTILAB_THREADS")
    if cap:
        workers = min(workers, max(1, int(cap)))
    return max(1, workers)


def _trial_stream(base_seed: int, cell_key: str, trial: int) -> RngStream:
    return RngStream(base_seed).child("trial", cell_key, trial)


def _run_batch(payload):
    """Worker entry point: run a contiguous batch of trials for one cell."""
    env_spec, agent_spec, horizon, cell_key, lo, hi, base_seed, record_series = payload
    results = []
    for i in range(lo, hi):
        try:
            env = build_env(env_spec)
            agent = build_agent(agent_spec)
            summary = run_trajectory(
                env, agent, horizon, _trial_stream(base_seed, cell_key, i),
                record_series=record_series,
            )
            results.append((i, summary, None))
        except Exception as exc:  # per-trial failures are recorded, not fatal
            results.append((i, None, f"{type(exc).__name__}: {exc}"))
    return results


def run_trials(config: ExperimentConfig, base_seed: int | None = None, *,
               workers: int | None = None, record_series: bool = False) -> list[TrialResult]:
    """Run all trials of one cell; results are ordered by trial index."""
    base_seed = config.seed if base_seed is None else base_seed
    key = config.canonical_key()
    n = config.trials
    w = resolve_workers(workers)
    chunk = max(1, -(-n // (w * 4)))
    payloads = [
        (config.env, config.agent, config.horizon, key, lo, min(lo + chunk, n), base_seed, record_series)
        for lo in range(0, n, chunk)
    ]
    out: list[TrialResult | None] = [None] * n
    if w == 1 or n == 1:
        batches = map(_run_batch, payloads)
    else:
        with ProcessPoolExecutor(max_workers=w) as pool:
            batches = list(pool.map(_run_batch, payloads))
    for batch in batches:
        for i, summary, err in batch:
            out[i] = TrialResult(i, summary, err)
    return [r for r in out if r is not None]


def _aggregate(values: list[float]) -> tuple[float, float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n == 1:
        return mean, 0.0, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    std = math.sqrt(var)
    return mean, std, _Z95 * std / math.sqrt(n)


def monte_carlo_sweep(config_grid, trials: int | None = None, base_seed: int | None = None, *,
                      workers: int | None = None) -> SweepTable:
    """Aggregate per-cell trajectory metrics over seeded independent trials.

    Every metric each cell's agent reports (always including average_reward)
    becomes one table row with mean, sample std, and a 95% normal-theory
    confidence half-width. Trial failures are recorded on the row; a cell
    with no successful trial is reported as missing (NaN mean).
    """
    rows: list[SweepRow] = []
    w = resolve_workers(workers)
    world = []
    for cfg in config_grid:
        n = trials if trials is not None else cfg.trials
        seed = base_seed if base_seed is not None else cfg.seed
        key = cfg.canonical_key()
        chunk = max(1, -(-n // (w * 4)))
        for lo in range(0, n, chunk):
            world.append((cfg, n, (cfg.env, cfg.agent, cfg.horizon, key, lo, min(lo + chunk, n), seed, False)))

    payloads = [p for _, _, p in world]
    if w == 1:
        batches = [_run_batch(p) for p in payloads]
    else:
        with ProcessPoolExecutor(max_workers=w) as pool:
            batches = list(pool.map(_run_batch, payloads))

    by_cell: dict[int, dict] = {}
    for (cfg, n, _), batch in zip(world, batches):
        slot = by_cell.setdefault(id(cfg), {"cfg": cfg, "n": n, "metrics": {}, "errors": {}})
        for i, summary, err in batch:
            if err is not None:
                slot["errors"][i] = err
            else:
                for name, value in summary.metrics.items():
                    slot["metrics"].setdefault(name, {})[i] = value

    for slot in by_cell.values():
        cfg, n = slot["cfg"], slot["n"]
        n_failed = len(slot["errors"])
        note = None
        if n_failed:
            first = slot["errors"][min(slot["errors"])]
            note = f"{n_failed}/{n} trials failed ({first})"
        if not slot["metrics"]:
            rows.append(SweepRow(dict(cfg.coords), "average_reward", float("nan"), float("nan"),
                                 float("nan"), 0, note or "all trials failed"))
            continue
        for metric in sorted(slot["metrics"]):
            per_trial = slot["metrics"][metric]
            values = [per_trial[i] for i in sorted(per_trial)]
            mean, std, ci = _aggregate(values)
            rows.append(SweepRow(dict(cfg.coords), metric, mean, std, ci, len(values), note))
    return SweepTable(rows)
