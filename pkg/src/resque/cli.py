"""Command-line entry point (``resque <subcommand>``).

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 under-powered report, 1 any other library error.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .datasets import generate_synthetic, load_dataset, save_dataset, split_for_retraining
from .exceptions import (
    ConfigError,
    NumericalError,
    ParameterError,
    ResqueError,
    StageError,
    UnderPoweredError,
)
from .randindex import resque_task_pipeline
from .representation import class_embeddings, resque_dist
from .shifts import KINDS, NoiseSpec, apply_shift
from .trainer import (
    extract_embeddings,
    init_params,
    load_checkpoint,
    reinit_head,
    save_checkpoint,
    train_to_cutoff,
)

EXIT_OK, EXIT_ERROR, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_UNDERPOWERED = 0, 1, 2, 3, 4


def _config(args):
    cfg = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    if args.seed is not None:
        cfg.seeds = [args.seed]
    return cfg


def _seed(args, cfg):
    return args.seed if args.seed is not None else cfg.seeds[0]


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _require_out(args):
    if not args.out:
        raise ConfigError(f"{args.command} needs --out")
    return args.out


def cmd_gen_data(args):
    cfg = _config(args)
    d = cfg.dataset
    seed = args.seed if args.seed is not None else d.seed
    ds = generate_synthetic(d.num_classes, d.samples_per_class, d.height, d.width, d.channels,
                            seed)
    out = _require_out(args)
    if args.split:
        original, shifted = split_for_retraining(ds, cfg.split_spec(seed))
        save_dataset(f"{out}.original", original)
        save_dataset(f"{out}.shifted", shifted)
    save_dataset(out, ds)


def cmd_train(args):
    cfg = _config(args)
    ds = load_dataset(args.data)
    seed = _seed(args, cfg)
    spec = cfg.model_spec(ds.num_classes, ds.image_shape)
    params, measures = train_to_cutoff(init_params(spec, seed), ds, replace(cfg.train, seed=seed))
    save_checkpoint(_require_out(args), params)
    _emit(measures.to_dict(), args.measures)


def cmd_shift(args):
    ds = load_dataset(args.data)
    seed = args.seed if args.seed is not None else 0
    save_dataset(_require_out(args), apply_shift(ds, NoiseSpec(args.kind, args.level, seed)))


def cmd_resque_dist(args):
    params = load_checkpoint(args.checkpoint)
    original = load_dataset(args.original)
    shifted = load_dataset(args.shifted, original.num_classes)
    k = original.num_classes
    a = extract_embeddings(params, original)
    b = extract_embeddings(params, shifted)
    value = resque_dist(class_embeddings(a.representations, a.labels, k),
                        class_embeddings(b.representations, b.labels, k))
    _emit({"resque_dist": value}, args.out)


def cmd_resque_task(args):
    cfg = _config(args)
    params = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    result = resque_task_pipeline(params, ds, replace(cfg.retrain, seed=_seed(args, cfg)),
                                  args.init_scheme)
    _emit(result.to_dict(), args.out)


def cmd_retrain(args):
    cfg = _config(args)
    params = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data)
    seed = _seed(args, cfg)
    if ds.num_classes != params.spec.num_classes:
        params = reinit_head(params, ds.num_classes, seed)
    retrain_cfg = replace(cfg.retrain, seed=seed)
    if args.cutoff is not None:
        retrain_cfg = replace(retrain_cfg, cutoff_accuracy=args.cutoff)
    params, measures = train_to_cutoff(params, ds, retrain_cfg)
    if args.out:
        save_checkpoint(args.out, params)
    _emit(measures.to_dict(), args.measures)


def _suite(run, args):
    cfg = _config(args)
    out = args.out or cfg.output.get("records")
    if not out:
        raise ConfigError("no record file: pass --out or set output.records")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    records = run(cfg, out, parallel=args.parallel)
    failed = sum(r.status != "ok" for r in records)
    logging.getLogger(__name__).info("%d records written (%d failed) to %s",
                                     len(records), failed, out)


def cmd_suite_dist(args):
    _suite(harness.run_distribution_suite, args)


def cmd_suite_task(args):
    _suite(harness.run_task_suite, args)


def cmd_report(args):
    result = harness.report(args.records, args.mode, args.out, raw=args.raw)
    for row in result["correlations"]:
        print(json.dumps(row, sort_keys=True))


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path")
    common.add_argument("--parallel", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="resque", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write a synthetic dataset")
    p.add_argument("--split", action="store_true",
                   help="also write <out>.original and <out>.shifted retraining splits")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train a model to the cutoff")
    p.add_argument("--data", required=True)
    p.add_argument("--measures", help="write training measures JSON here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("shift", parents=[common], help="apply a corruption to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--level", type=int, required=True)
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("resque-dist", parents=[common], help="distribution-shift index")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--original", required=True)
    p.add_argument("--shifted", required=True)
    p.set_defaults(func=cmd_resque_dist)

    p = sub.add_parser("resque-task", parents=[common], help="task-change index")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--init-scheme", default="labels",
                   choices=("labels", "k-means++", "random-entropy"))
    p.set_defaults(func=cmd_resque_task)

    p = sub.add_parser("retrain", parents=[common], help="retrain a checkpoint to the cutoff")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--cutoff", type=float)
    p.add_argument("--measures", help="write retraining measures JSON here (default stdout)")
    p.set_defaults(func=cmd_retrain)

    p = sub.add_parser("suite-dist", parents=[common], help="run the distribution-shift suite")
    p.set_defaults(func=cmd_suite_dist)

    p = sub.add_parser("suite-task", parents=[common], help="run the task-change suite")
    p.set_defaults(func=cmd_suite_task)

    p = sub.add_parser("report", parents=[common], help="correlation tables from records")
    p.add_argument("records")
    p.add_argument("--mode", choices=("dist", "task"), default="dist")
    p.add_argument("--raw", action="store_true", help="correlate raw runs, not seed means")
    p.set_defaults(func=cmd_report)
    return parser


def _exit_code(exc):
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, UnderPoweredError):
        return EXIT_UNDERPOWERED
    if isinstance(exc, NumericalError):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    return EXIT_ERROR


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.parallel < 1:
        print("error: --parallel must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.func(args)
    except ResqueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
