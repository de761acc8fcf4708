"""Batch experiments over policies and episode seeds, with CSV output."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import ExperimentConfig, PolicySpec
from .observation import ObservationTable
from .world import run_episode

log = logging.getLogger(__name__)

METRICS_HEADER = "policy,K,seed,t,error_m"
SUMMARY_HEADER = "policy,K,t,n,mean_error_m,std_error_m"


def fmt(x: float) -> str:
    return f"{x:.9g}"


@dataclass
class EpisodeResult:
    policy: PolicySpec
    episode: int
    seed: int
    errors: list[float]
    return_min: float | None = None
    return_max: float | None = None
    simulations: int = 0


@dataclass
class BatchResult:
    results: list[EpisodeResult]
    metrics_path: Path | None = None
    summary_path: Path | None = None

    def errors(self, policy: str) -> list[list[float]]:
        """Per-episode error series for a policy label like ``mcts:5``."""
        return [r.errors for r in self.results if str(r.policy) == policy]


_WORKER_CACHE: dict = {}


def _run_one(values: dict, table: ObservationTable, policy: PolicySpec, episode: int) -> EpisodeResult:
    key = json.dumps(values, sort_keys=True)
    if _WORKER_CACHE.get("key") != key:
        cfg = ExperimentConfig(dict(values))
        _WORKER_CACHE.update(key=key, cfg=cfg, setup=cfg.setup(table))
    cfg, setup = _WORKER_CACHE["cfg"], _WORKER_CACHE["setup"]
    seed = cfg["experiment.base_seed"] + episode
    pcfg = cfg.planner_config(policy.horizon) if policy.name == "mcts" else None
    ep = run_episode(policy.name, setup, seed, pcfg)
    res = EpisodeResult(policy, episode, seed, ep.errors)
    if ep.planner_stats is not None:
        res.return_min = ep.planner_stats.return_min
        res.return_max = ep.planner_stats.return_max
        res.simulations = ep.planner_stats.simulations
    return res


def _run_star(args):
    return _run_one(*args)


def run_episodes(cfg: ExperimentConfig, table: ObservationTable | None = None,
                 threads: int = 1) -> list[EpisodeResult]:
    """Run every (policy, episode) pair; results come back in task order."""
    table = cfg.table() if table is None else table
    tasks = [(cfg.values, table, p, e)
             for p in cfg.policies() for e in range(cfg["experiment.num_episodes"])]
    if threads <= 1:
        out = []
        for t in tasks:
            out.append(_run_one(*t))
            log.debug("done %s episode %d", t[2], t[3])
        return out
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_run_star, tasks, chunksize=1))


def metrics_rows(results: list[EpisodeResult]) -> list[str]:
    return [f"{r.policy.name},{r.policy.horizon},{r.seed},{t},{fmt(e)}"
            for r in results for t, e in enumerate(r.errors)]


def summary_rows(results: list[EpisodeResult]) -> list[str]:
    groups: dict[PolicySpec, list[list[float]]] = {}
    for r in results:
        groups.setdefault(r.policy, []).append(r.errors)
    rows = []
    for pol, series in groups.items():
        for t in range(max(len(s) for s in series)):
            vals = [s[t] for s in series if t < len(s)]
            n = len(vals)
            mean = sum(vals) / n
            std = math.sqrt(sum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
            rows.append(f"{pol.name},{pol.horizon},{t},{n},{fmt(mean)},{fmt(std)}")
    return rows


def write_csv(path: Path, header: str, rows: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def run_batch(cfg: ExperimentConfig, out_dir=None, table: ObservationTable | None = None,
              threads: int = 1) -> BatchResult:
    """Run the experiment grid and write ``metrics.csv`` and ``summary.csv``.

    Episode ``e`` uses seed ``base_seed + e`` for every policy, so all
    policies face the same source path and initial positions.
    """
    results = run_episodes(cfg, table, threads)
    batch = BatchResult(results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        batch.metrics_path = out / "metrics.csv"
        batch.summary_path = out / "summary.csv"
        write_csv(batch.metrics_path, METRICS_HEADER, metrics_rows(results))
        write_csv(batch.summary_path, SUMMARY_HEADER, summary_rows(results))
    return batch
