"""Command-line entry point.

Verbs: gen, train, eval, stream, gradcheck, kernel-dump, rank, converge.
Every run echoes its resolved flags (including the seed) to stderr so runs
are self-documenting; stdout carries only machine-readable output. Exit
codes: 0 success, 1 usage error, 2 data/format error, 3 numeric failure.
No verb mutates its input files.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import data as data_mod
from . import evaluate as eval_mod
from . import model as model_mod
from . import ssm as ssm_mod
from . import training as train_mod
from .errors import DataFormatError, NumericError


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser():
    parser = _Parser(prog="ms4", description=__doc__)
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="random seed (printed at startup)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker hint; all paths are seed-deterministic regardless")

    p = sub.add_parser("gen", help="generate a synthetic dataset")
    p.add_argument("--task", choices=["freq"], default="freq")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--len", type=int, required=True, dest="length")
    p.add_argument("--f-low", type=float, default=0.05)
    p.add_argument("--f-high", type=float, default=0.125)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--features", type=int, default=1)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("train", help="train a model on a TSC-CSV dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--state", type=int, default=64)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--normalized", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch", type=int, default=256)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--out", default="model.ckpt")
    p.add_argument("--history", default=None)
    common(p)

    p = sub.add_parser("eval", help="print misclassification error of a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch", type=int, default=256)
    common(p)

    p = sub.add_parser("stream", help="recurrent O(1)-memory inference")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--check", action="store_true",
                   help="compare with the batch path and print the max abs deviation")
    p.add_argument("--tol", type=float, default=1e-4)
    common(p)

    p = sub.add_parser("gradcheck", help="finite-difference check of the gradient engine")
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--state", type=int, default=8)
    p.add_argument("--features", type=int, default=3)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--len", type=int, default=16, dest="length")
    p.add_argument("--batch", type=int, default=2)
    p.add_argument("--normalized", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    common(p)

    p = sub.add_parser("kernel-dump", help="write a checkpoint's convolution kernel as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--len", type=int, required=True, dest="length")
    p.add_argument("--block", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("rank", help="summarize an error-matrix CSV")
    p.add_argument("--table", required=True)
    p.add_argument("--std", default=None)
    p.add_argument("--out", required=True)
    common(p)

    p = sub.add_parser("converge", help="MS4 vs MS4N threshold-crossing report")
    p.add_argument("--data", required=True)
    p.add_argument("--seeds", default="0,1,2,3,4")
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--state", type=int, default=8)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--out", required=True)
    common(p)

    return parser


def _announce(args):
    flags = " ".join(f"{k}={v}" for k, v in sorted(vars(args).items()) if k != "verb")
    print(f"ms4 {args.verb} | {flags}", file=sys.stderr)


def _cmd_gen(args):
    dataset = data_mod.synth_freq_task(
        args.n, args.length, f_low=args.f_low, f_high=args.f_high,
        noise_std=args.noise, seed=args.seed, n_features=args.features,
    )
    data_mod.save_dataset(dataset, args.out)
    print(args.out)
    return 0


def _cmd_train(args):
    dataset = data_mod.load_dataset(args.data)
    mdl = model_mod.init_model(
        dataset.n_features, args.hidden, args.state, dataset.n_classes,
        n_layers=args.layers, normalized=args.normalized,
        dropout_rate=args.dropout, seed=args.seed,
    )
    print(
        f"model: params={model_mod.count_params(mdl)} "
        f"mmac={model_mod.count_mmacs(mdl, dataset.length):.3f} (L={dataset.length})",
        file=sys.stderr,
    )
    config = train_mod.TrainConfig(
        lr=args.lr, batch_size=args.batch, max_epochs=args.epochs,
        patience=args.patience, val_fraction=args.val_frac, seed=args.seed,
    )
    best, history = train_mod.train(mdl, dataset, config)
    model_mod.save_checkpoint(best, args.out)
    if args.history:
        train_mod.write_history_csv(history, args.history)
    for i in range(history.n_epochs):
        print(
            f"epoch {i + 1} train_loss {history.train_loss[i]:.6f} "
            f"train_acc {history.train_acc[i]:.4f} val_loss {history.val_loss[i]:.6f} "
            f"val_acc {history.val_acc[i]:.4f}",
            file=sys.stderr,
        )
    print(args.out)
    return 0


def _cmd_eval(args):
    mdl = model_mod.load_checkpoint(args.model)
    dataset = data_mod.load_dataset(args.data)
    predictions = model_mod.predict(dataset.x, mdl, batch_size=args.batch)
    print(repr(eval_mod.misclassification_error(predictions, dataset.y)))
    return 0


def _cmd_stream(args):
    mdl = model_mod.load_checkpoint(args.model)
    dataset = data_mod.load_dataset(args.data)
    streamed = np.stack([model_mod.stream_logits(mdl, xi) for xi in dataset.x])
    if args.check:
        batch = model_mod.forward(dataset.x, mdl)
        deviation = float(np.abs(streamed - batch).max())
        print(repr(deviation))
        if deviation > args.tol:
            raise NumericError(
                f"streaming and batch paths deviate by {deviation} > tol {args.tol}"
            )
        return 0
    predictions = np.argmax(streamed, axis=-1)
    print(repr(eval_mod.misclassification_error(predictions, dataset.y)))
    return 0


def _cmd_gradcheck(args):
    from . import autodiff as ad

    mdl = model_mod.init_model(
        args.features, args.hidden, args.state, args.classes,
        normalized=args.normalized, dropout_rate=0.0, seed=args.seed,
    )
    rng = np.random.default_rng(args.seed)
    x = rng.standard_normal((args.batch, args.length, args.features))
    labels = rng.integers(0, args.classes, size=args.batch)

    def loss_fn(leaves):
        logits = model_mod.forward_t(
            ad.Tensor(x), leaves, mdl.n_layers, mdl.normalized, 0.0, False, rng,
        )
        return train_mod.cross_entropy_t(logits, labels)

    errors = ad.finite_diff_errors(loss_fn, mdl.leaves(), epsilon=args.eps)
    width = max(len(k) for k in errors)
    for name in sorted(errors):
        print(f"{name:<{width}}  {errors[name]:.3e}")
    worst = max(errors.values())
    print(f"{'max':<{width}}  {worst:.3e}")
    if worst > args.tol:
        raise NumericError(f"gradient check failed: max relative error {worst} > {args.tol}")
    return 0


def _cmd_kernel_dump(args):
    mdl = model_mod.load_checkpoint(args.model)
    if not 0 <= args.block < mdl.n_layers:
        raise ValueError(f"--block must be in [0, {mdl.n_layers}), got {args.block}")
    kernel = ssm_mod.compute_kernel(mdl.blocks[args.block].ssm, args.length)
    ssm_mod.write_kernel_csv(kernel, args.out)
    print(args.out)
    return 0


def _cmd_rank(args):
    table = eval_mod.read_error_matrix(args.table)
    if args.std:
        stds = eval_mod.read_error_matrix(args.std)
        if stds.models != table.models or stds.datasets != table.datasets:
            raise DataFormatError(f"{args.std}: names disagree with {args.table}")
        table.stds = stds.errors
    eval_mod.write_summary_csv(eval_mod.summarize(table), args.out)
    print(args.out)
    return 0


def _cmd_converge(args):
    dataset = data_mod.load_dataset(args.data)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    except ValueError as exc:
        raise _UsageError(f"--seeds must be a comma-separated integer list: {exc}") from exc
    if not seeds:
        raise _UsageError("--seeds must name at least one seed")
    config = train_mod.TrainConfig(
        lr=args.lr, batch_size=args.batch, max_epochs=args.epochs,
        patience=args.patience, val_fraction=args.val_frac,
    )
    rows = train_mod.compare_convergence(
        dataset, config, seeds, args.hidden, args.state, args.threshold,
        dropout_rate=args.dropout,
    )
    train_mod.write_convergence_csv(rows, args.out)
    for variant in ("MS4", "MS4N"):
        crossings = [r["crossing_epoch"] for r in rows if r["model"] == variant]
        reached = [c for c in crossings if c is not None]
        mean = sum(reached) / len(reached) if reached else float("nan")
        print(
            f"{variant}: reached threshold in {len(reached)}/{len(crossings)} runs, "
            f"mean crossing epoch {mean:.2f}",
            file=sys.stderr,
        )
    print(args.out)
    return 0


_HANDLERS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "stream": _cmd_stream,
    "gradcheck": _cmd_gradcheck,
    "kernel-dump": _cmd_kernel_dump,
    "rank": _cmd_rank,
    "converge": _cmd_converge,
}


def run(argv):
    """Parse and execute one invocation; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.threads < 1:
            raise _UsageError(f"--threads must be >= 1, got {args.threads}")
        _announce(args)
        return _HANDLERS[args.verb](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DataFormatError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main(argv=None):
    try:
        code = run(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:  # argparse -h/--help
        code = exc.code if isinstance(exc.code, int) else 0
    return code


if __name__ == "__main__":
    sys.exit(main())
