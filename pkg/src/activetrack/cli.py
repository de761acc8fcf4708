"""Command line entry point: ``activetrack {simulate,batch,gen-table}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .batch import run_batch
from .config import ConfigError, ExperimentConfig, PolicySpec
from .observation import TableFormatError, build_synthetic_table
from .world import run_episode

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["experiment.base_seed"] = args.seed
    if getattr(args, "table", None):
        overrides["observation.table"] = args.table
    if getattr(args, "policy", None):
        overrides["experiment.policies"] = list(args.policy)
    return cfg.with_values(**overrides) if overrides else cfg


def cmd_gen_table(args) -> int:
    cfg = _load_config(args)
    build_synthetic_table(cfg.synthetic_params()).save(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_batch(args) -> int:
    cfg = _load_config(args)
    if args.horizon is not None:
        pols = [PolicySpec("mcts", args.horizon) if p.name == "mcts" else p for p in cfg.policies()]
        cfg = cfg.with_values(**{"experiment.policies": list(dict.fromkeys(map(str, pols)))})
    res = run_batch(cfg, args.out, threads=args.threads)
    print(f"wrote {res.metrics_path} and {res.summary_path}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    policy = PolicySpec.parse(args.policy[0] if args.policy else "mcts:5")
    if args.horizon is not None and policy.name == "mcts":
        policy = PolicySpec("mcts", args.horizon)
    setup = cfg.setup()
    pcfg = cfg.planner_config(policy.horizon) if policy.name == "mcts" else None

    def log_step(t, u, z, w, err):
        print(f"t={t:3d} u={u} z={z.value:6.1f} robot=({w.robot.x:.2f},{w.robot.y:.2f}) "
              f"source=({w.source.x:.2f},{w.source.y:.2f}) error={err:.3f} m")

    ep = run_episode(policy.name, setup, cfg["experiment.base_seed"], pcfg, log=log_step)
    print(f"mean error {sum(ep.errors) / len(ep.errors):.3f} m over {len(ep.errors)} steps")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activetrack", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--table", help="observation table CSV (default: synthetic)")
        p.add_argument("--seed", type=int, help="base seed")

    p = sub.add_parser("simulate", help="run one episode with a step log")
    common(p)
    p.add_argument("--policy", nargs=1, help="random, patrol or mcts:K")
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("batch", help="run all policies over all episodes")
    common(p)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--policy", nargs="+", help="override experiment.policies")
    p.add_argument("--horizon", type=int, help="override the horizon of mcts policies")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("gen-table", help="write a synthetic observation table")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_table)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, TableFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
