"""Command line entry point: ``solsa {train,eval,schedule,profile-mem,profile-work,gen-data}``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import DataError, SyntheticTask, generate_synthetic, load_dataset, save_dataset
from .dynamics import ConfigurationError
from .profiling import profile_memory, profile_workload
from .training import RunConfig, Trainer, evaluate, load_params, save_params, train

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


def _config(args) -> RunConfig:
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    return cfg.with_overrides(args.set or [])


def _shape(cfg: RunConfig) -> tuple[list[int], int]:
    """Layer sizes and sequence length implied by a config, without generating data."""
    if cfg.synthetic is not None:
        spec = {k: v for k, v in cfg.synthetic.items() if k != "seed"}
        task = SyntheticTask(**spec)
        return [task.dim, *cfg.hidden, task.classes], task.length
    if cfg.dataset is not None:
        ds = load_dataset(cfg.dataset)
        return [ds.dim, *cfg.hidden, ds.classes], ds.max_length
    raise ConfigurationError("config names neither a dataset nor a synthetic task")


def _emit(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def cmd_train(args) -> int:
    cfg = _config(args)
    if args.out:
        cfg.output_dir = args.out
    params, metrics = train(cfg)
    if cfg.output_dir and metrics.schedule is not None:
        (Path(cfg.output_dir) / "schedule.json").write_text(json.dumps(metrics.schedule) + "\n")
    print(json.dumps({"final_test_acc": metrics.final_test_accuracy,
                      "epochs": len(metrics.epochs), "schedule": metrics.schedule,
                      "config_hash": metrics.config_hash}))
    return EXIT_OK


def cmd_eval(args) -> int:
    params = load_params(args.params)
    if args.dataset:
        dataset = load_dataset(args.dataset)
    else:
        dataset = _config(args).load_data()
    acc = evaluate(params, dataset, split=args.split, scale=args.scale)
    print(json.dumps({"split": args.split, "accuracy": acc}))
    return EXIT_OK


def cmd_schedule(args) -> int:
    cfg = _config(args)
    trainer = Trainer(cfg)
    if trainer.n_points == 0:
        raise ConfigurationError(f"algorithm {cfg.algorithm!r} with n_points=0 has no schedule")
    schedule = trainer.build_schedule()
    _emit(list(schedule.points), args.out)
    if args.params_out:
        save_params(trainer.params, args.params_out)
    return EXIT_OK


def cmd_profile_mem(args) -> int:
    if args.sizes:
        sizes, length = [int(s) for s in args.sizes.split("-")], args.length
    else:
        sizes, length = _shape(_config(args))
        length = args.length or length
    _emit(profile_memory(sizes, length, itemsize=args.itemsize), args.out)
    return EXIT_OK


def cmd_profile_work(args) -> int:
    n_points = None
    if args.sizes:
        sizes, length = [int(s) for s in args.sizes.split("-")], args.length
    else:
        cfg = _config(args)
        sizes, length = _shape(cfg)
        length = args.length or length
        n_points = cfg.n_points
    report = profile_workload(sizes, length, n_points=n_points)
    if not args.full:
        for key in ("solsa_ops", "bptt_ops", "tbptt_ops"):
            report.pop(key)
    _emit(report, args.out)
    return EXIT_OK


def cmd_gen_data(args) -> int:
    task = SyntheticTask(task=args.task, dim=args.dim, length=args.length, classes=args.classes,
                         n_train=args.n_train, n_test=args.n_test, noise=args.noise,
                         amplitude=args.amplitude)
    root = save_dataset(generate_synthetic(task, args.seed), args.out)
    print(json.dumps({"written": str(root)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="solsa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (value parsed as JSON if possible)")
        return p

    p = with_config(sub.add_parser("train", help="train a network"))
    p.add_argument("--out", help="output directory for metrics, params and schedule")
    p.set_defaults(func=cmd_train)

    p = with_config(sub.add_parser("eval", help="evaluate saved parameters"))
    p.add_argument("--params", required=True, help="params.npz written by train")
    p.add_argument("--dataset", help="dataset directory (else taken from the config)")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--scale", type=float, help="input current scale (default: 1/max|train|)")
    p.set_defaults(func=cmd_eval)

    p = with_config(sub.add_parser("schedule", help="build an update schedule"))
    p.add_argument("--out", help="write the JSON array here instead of stdout")
    p.add_argument("--params-out", help="also save the parameters after the selection epochs")
    p.set_defaults(func=cmd_schedule)

    for name, func in (("profile-mem", cmd_profile_mem), ("profile-work", cmd_profile_work)):
        p = with_config(sub.add_parser(name, help=f"analytic {name[8:]} profile"))
        p.add_argument("--sizes", help="layer sizes like 8-200-200-10 (overrides config)")
        p.add_argument("--length", type=int, help="sequence length")
        p.add_argument("--out", help="write JSON report here instead of stdout")
        if name == "profile-mem":
            p.add_argument("--itemsize", type=int, default=8, help="bytes per stored value")
        else:
            p.add_argument("--full", action="store_true", help="include per-step op arrays")
        p.set_defaults(func=func)

    p = sub.add_parser("gen-data", help="write a synthetic dataset")
    p.add_argument("--task", choices=("early-cue", "late-cue", "order"), default="order")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--n-train", type=int, default=200)
    p.add_argument("--n-test", type=int, default=100)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("profile-mem", "profile-work") and args.sizes and not args.length:
        parser.error("--sizes needs --length")
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigurationError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
