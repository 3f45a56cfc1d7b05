"""Command line entry point: ``relay-ddpg {train,trials,eval,selftest}``."""
from __future__ import annotations

import argparse
import glob
import logging
import sys
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load_config
from .harness import (emit_csv, emit_evaluation_csv, emit_summary_csv, run_evaluation, run_training,
                      run_trials, save_checkpoint, write_trials_outputs)


def _config(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if getattr(args, "agent", None):
        overrides["agent"] = args.agent
    if getattr(args, "episodes", None) is not None and args.command != "eval":
        overrides["episodes"] = args.episodes
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    if getattr(args, "base_seed", None) is not None:
        overrides["base_seed"] = args.base_seed
    return config.replace(**overrides) if overrides else config


def cmd_train(args) -> int:
    config = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_training(config, args.seed, 0)
    emit_csv(result.metrics, out / "metrics.csv")
    emit_summary_csv([result.summary], out / "summary.csv")
    save_checkpoint(out / f"{config.agent}_seed{args.seed}.ckpt.json", result.agent, config,
                    args.seed, 0, result.summary.successful)
    s = result.summary
    print(f"{config.agent} seed={args.seed} last{config.summary_window}_mean={s.last40_mean:.4f} "
          f"std={s.last40_std:.4f} successful={s.successful}")
    return 0


def cmd_trials(args) -> int:
    config = _config(args)
    report = run_trials(config, jobs=args.jobs)
    write_trials_outputs(report, args.out)
    for s in report.summaries:
        print(f"trial {s.trial} seed={s.seed} last{config.summary_window}_mean={s.last40_mean:.4f} "
              f"successful={s.successful}")
    flag = " (single trial: std set to 0)" if report.std_degenerate and report.n_successful == 1 else ""
    print(f"{config.agent}: {report.n_successful}/{config.trials} successful, "
          f"mean={report.mean:.4f} std={report.std:.4g}{flag}")
    return 0


def cmd_eval(args) -> int:
    paths = []
    for pattern in args.checkpoints:
        matched = sorted(glob.glob(pattern))
        paths.extend(matched or [pattern])
    thresholds = [float(x) for x in args.thresholds.split(",")]
    report = run_evaluation(paths, thresholds, args.episodes, seed=args.seed)
    for path, reason in report.skipped.items():
        print(f"skipped {path}: {reason}", file=sys.stderr)
    if not report.table:
        print("no readable checkpoints", file=sys.stderr)
        return 1
    emit_evaluation_csv(report, args.out)
    print("method".ljust(10) + "".join(f"{lam:>9g}" for lam in report.thresholds))
    for kind, row in report.table.items():
        print(kind.ljust(10) + "".join(f"{v:9.4f}" for v in row))
    return 0


def cmd_selftest(args) -> int:
    from . import selftest
    ok = selftest.run_all(verbose=True)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relay-ddpg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one trial")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/train")
    p.add_argument("--agent", choices=("per_ddpg", "ddpg", "dqn", "random"))
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("trials", help="train several seeded trials and summarize")
    p.add_argument("--config")
    p.add_argument("--trials", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--out", default="runs/trials")
    p.add_argument("--agent", choices=("per_ddpg", "ddpg", "dqn", "random"))
    p.add_argument("--episodes", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_trials)

    p = sub.add_parser("eval", help="evaluate frozen checkpoints over outage thresholds")
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--thresholds", default="0.05,0.1,0.2,0.3,0.5")
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="runs/eval.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("selftest", help="gradient, sum-tree and fading-stationarity checks")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
