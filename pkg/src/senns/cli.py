"""Command-line entry point: ``senns train|extract|eval|pairs|gradcheck``.

Options can also come from a key-value config file (``--config``), either
bare ``key = value`` lines or a ``[senns]`` INI section. Keys use the long
option names with underscores (``max_iters = 200``). Command-line flags win
over the file.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import sys
from dataclasses import dataclass, field

import numpy as np

from . import data as data_mod
from . import network as network_mod
from ._io import atomic_open
from .errors import (
    DataError,
    DegenerateClassError,
    HyperparamError,
    ModelFormatError,
    NumericError,
    ShapeError,
)
from .evaluation import evaluate
from .network import TransferKind, default_transfer, init_random
from .objective import Hyperparams
from .pairs import build_full, build_heuristic, write_csv
from .trainer import finite_diff_grad, grad_total, max_relative_error, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

GRADCHECK_THRESHOLD = 1e-4

log = logging.getLogger("senns")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    source: dict = field(default_factory=dict)
    hidden: list[int] = field(default_factory=lambda: [4])
    transfer: str | None = None
    outputs: int | None = None
    hp: Hyperparams = field(default_factory=Hyperparams)
    pair_mode: str = "full"
    k: int = 3
    seed: int = 0
    model_out: str | None = None
    telemetry_out: str | None = None
    summary_out: str | None = None
    threads: int = 1
    reproducible: bool = True
    grad_mode: str = "fast"


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_data_args(p):
    g = p.add_argument_group("dataset")
    g.add_argument("--csv", help="CSV file with numeric features and one label column")
    g.add_argument("--label-column", default=None, help="label column index or header name (default: last)")
    g.add_argument("--idx-images", help="IDX3 image file")
    g.add_argument("--idx-labels", help="IDX1 label file")
    g.add_argument("--limit", type=int, default=None, help="use only the first N IDX examples")
    g.add_argument("--synthetic", choices=["gaussians", "moons"], help="generate a seeded toy dataset")
    g.add_argument("--n", type=int, default=None, help="synthetic: points per class (gaussians) or total (moons)")
    g.add_argument("--noise", type=float, default=None, help="synthetic: moons noise / gaussian sigma")
    g.add_argument("--data-seed", type=int, default=None, help="synthetic: generator seed (default: --seed)")
    g.add_argument("--standardize", action="store_true", default=None, help="z-score every feature")
    g.add_argument("--input-scale", type=float, default=None,
                   help="with --standardize: target standard deviation per feature (default 1)")


def _add_train_args(p):
    g = p.add_argument_group("model and optimisation")
    g.add_argument("--hidden", default=None, help="comma-separated hidden layer sizes, e.g. 8,4 (empty for none)")
    g.add_argument("--transfer", default=None, help="comma-separated transfer kinds per non-input layer")
    g.add_argument("--outputs", type=int, default=None, help="output layer size (default: number of classes)")
    g.add_argument("--lambdas", default=None, help="l1,l2,l3,l4 summing to 1")
    g.add_argument("--alpha", type=float, default=None)
    g.add_argument("--tol", type=float, default=None)
    g.add_argument("--max-iters", type=int, default=None)
    g.add_argument("--pairs", choices=["full", "heuristic"], default=None)
    g.add_argument("--k", type=int, default=None, help="farthest same-class neighbours in heuristic mode")
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--grad-mode", choices=["fast", "strict"], default=None,
                   help="strict runs the per-pair two-backprop gradient; --threads applies to it")
    g.add_argument("--threads", type=int, default=None)
    g.add_argument("--reproducible", action=argparse.BooleanOptionalAction, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="senns", description="Sparse feature extraction networks.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a network and write the model file")
    p.add_argument("--config", help="key-value config file")
    _add_data_args(p)
    _add_train_args(p)
    p.add_argument("--model", help="output model path")
    p.add_argument("--telemetry", help="per-iteration CSV (iter,J,J1,J2,J3); default MODEL.telemetry.csv")
    p.add_argument("--summary", help="run summary (key=value text); default MODEL.summary.txt")

    p = sub.add_parser("extract", help="write network outputs as a feature CSV")
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--model", required=False)
    _add_data_args(p)
    p.add_argument("--out", required=False, help="feature CSV path")

    p = sub.add_parser("eval", help="evaluate a feature CSV")
    p.add_argument("features")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=1e-3)
    p.add_argument("--label-column", default=-1)
    p.add_argument("--csv-out", help="also write the report as CSV")

    p = sub.add_parser("pairs", help="dump the pair list as CSV")
    p.add_argument("--config", help="key-value config file")
    _add_data_args(p)
    p.add_argument("--pairs", choices=["full", "heuristic"], default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=False)

    p = sub.add_parser("gradcheck", help="compare analytic gradients with finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--layers", default="3,4,2", help="layer sizes including input and output")
    p.add_argument("--transfer", default=None)
    p.add_argument("--lambdas", default="0.3,0.3,0.2,0.2")
    p.add_argument("--mode", choices=["fast", "strict"], default="fast")
    p.add_argument("--threshold", type=float, default=GRADCHECK_THRESHOLD)
    # fault injection for tests: compare the negated gradient (wrong descent sign)
    p.add_argument("--flip-sign", action="store_true", help=argparse.SUPPRESS)
    return parser


def read_config_file(path) -> dict:
    with open(path) as fh:
        text = fh.read()
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError:
        cp.read_string("[senns]\n" + text)
    if cp.has_section("senns"):
        items = cp.items("senns")
    else:
        items = [kv for s in cp.sections() for kv in cp.items(s)]
    return {k.replace("-", "_"): v for k, v in items}


_BOOL_KEYS = {"standardize", "reproducible"}
_INT_KEYS = {"limit", "n", "data_seed", "max_iters", "k", "seed", "threads", "outputs"}
_FLOAT_KEYS = {"noise", "alpha", "tol", "input_scale"}


def merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill options left unset on the command line from ``--config``."""
    path = getattr(args, "config", None)
    if not path:
        return args
    try:
        values = read_config_file(path)
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for key, raw in values.items():
        if not hasattr(args, key):
            raise UsageError(f"unknown config key {key!r} in {path}")
        if getattr(args, key) is not None:
            continue
        try:
            if key in _BOOL_KEYS:
                val = raw.strip().lower() in ("1", "true", "yes", "on")
            elif key in _INT_KEYS:
                val = int(raw)
            elif key in _FLOAT_KEYS:
                val = float(raw)
            else:
                val = raw.strip()
        except ValueError:
            raise UsageError(f"bad value for {key!r} in {path}: {raw!r}") from None
        setattr(args, key, val)
    return args


def _int_list(text) -> list[int]:
    text = (text or "").strip()
    if not text:
        return []
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None
    if any(v <= 0 for v in vals):
        raise UsageError(f"layer sizes must be positive, got {text!r}")
    return vals


def _transfer_list(text, n_layers) -> list[TransferKind]:
    if not text:
        return default_transfer(n_layers)
    try:
        kinds = [TransferKind.parse(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if len(kinds) == 1:
        kinds = kinds * (n_layers - 1)
    if len(kinds) != n_layers - 1:
        raise UsageError(f"{len(kinds)} transfer kinds for {n_layers - 1} non-input layers")
    return kinds


def _lambdas(text) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--lambdas expects four numbers, got {text!r}") from None
    if len(vals) != 4:
        raise UsageError(f"--lambdas expects four numbers, got {len(vals)}")
    return vals


def data_spec_from_args(args) -> dict:
    seed = args.data_seed if args.data_seed is not None else (getattr(args, "seed", None) or 0)
    chosen = [s for s in ("csv", "idx_images", "synthetic") if getattr(args, s, None)]
    if len(chosen) != 1:
        raise UsageError("give exactly one dataset source: --csv, --idx-images/--idx-labels or --synthetic")
    if args.csv:
        label = args.label_column if args.label_column is not None else -1
        spec = {"source": "csv", "path": args.csv, "label_column": label}
    elif args.idx_images:
        if not args.idx_labels:
            raise UsageError("--idx-images needs --idx-labels")
        spec = {"source": "idx", "images": args.idx_images, "labels": args.idx_labels, "limit": args.limit}
    elif args.synthetic == "gaussians":
        spec = {"source": "gaussians", "n": args.n or 20, "sigma": args.noise if args.noise is not None else 1.0, "seed": seed}
    else:
        spec = {"source": "moons", "n": args.n or 100, "noise": args.noise if args.noise is not None else 0.1, "seed": seed}
    spec["standardize"] = bool(args.standardize)
    if args.input_scale is not None:
        if not args.input_scale > 0:
            raise UsageError("--input-scale must be positive")
        spec["scale"] = args.input_scale
    return spec


def run_config_from_args(args) -> RunConfig:
    hidden = _int_list(args.hidden if args.hidden is not None else "4")
    lambdas = _lambdas(args.lambdas or "0.25,0.25,0.25,0.25")
    try:
        hp = Hyperparams.from_lambdas(
            lambdas,
            alpha=args.alpha if args.alpha is not None else 0.01,
            max_iters=args.max_iters if args.max_iters is not None else 500,
            tol=args.tol if args.tol is not None else 1e-8,
        )
    except HyperparamError as exc:
        raise UsageError(str(exc)) from None
    k = args.k if args.k is not None else 3
    if k < 1:
        raise UsageError("--k must be at least 1")
    if args.outputs is not None and args.outputs < 1:
        raise UsageError("--outputs must be at least 1")
    threads = args.threads if args.threads is not None else 1
    if threads < 1:
        raise UsageError("--threads must be at least 1")
    return RunConfig(
        source=data_spec_from_args(args),
        hidden=hidden,
        transfer=args.transfer,
        outputs=args.outputs,
        hp=hp,
        pair_mode=args.pairs or "full",
        k=k,
        seed=args.seed if args.seed is not None else 0,
        model_out=args.model,
        telemetry_out=args.telemetry,
        summary_out=args.summary,
        threads=threads,
        reproducible=True if args.reproducible is None else args.reproducible,
        grad_mode=args.grad_mode or "fast",
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _build_pairs(dataset, mode, k):
    if mode == "full":
        return build_full(dataset)
    return build_heuristic(dataset, k)


def cmd_train(config: RunConfig) -> int:
    if not config.model_out:
        raise UsageError("train needs --model")
    dataset = data_mod.load_dataset(config.source)
    sizes = [dataset.dim, *config.hidden, config.outputs or dataset.n_classes]
    transfer = _transfer_list(config.transfer, len(sizes))
    net = init_random(sizes, transfer, seed=config.seed)
    pairs = _build_pairs(dataset, config.pair_mode, config.k)
    report = train(
        net, dataset, pairs, config.hp, seed=config.seed, mode=config.grad_mode,
        threads=config.threads, reproducible=config.reproducible,
    )
    log.info("trained %d iterations, J=%r", report.iterations_run, report.final.j_total)
    network_mod.save(report.network, config.model_out)
    report.write_telemetry(config.telemetry_out or f"{config.model_out}.telemetry.csv")
    summary = {
        "layer_sizes": " ".join(map(str, sizes)),
        "transfer": " ".join(k.value for k in transfer),
        "lambdas": ",".join(repr(v) for v in config.hp.lambdas),
        "alpha": repr(config.hp.alpha),
        "pairs": f"{config.pair_mode} ({len(pairs)} pairs, m_c={pairs.m_c}, m_d={pairs.m_d})",
        "m": dataset.m,
        "seed": config.seed,
        "iterations": report.iterations_run,
        "converged": report.converged,
        "J_initial": repr(report.history[0].j_total),
        "J_final": repr(report.final.j_total),
    }
    text = "".join(f"{k}={v}\n" for k, v in summary.items())
    with atomic_open(config.summary_out or f"{config.model_out}.summary.txt", "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_extract(model_path, data_spec, out_path) -> int:
    net = network_mod.load(model_path)
    dataset = data_mod.load_dataset(data_spec)
    if dataset.dim != net.n_inputs:
        raise ShapeError("data dimension vs model input size", net.n_inputs, dataset.dim)
    data_mod.export_features(net, dataset, out_path)
    return EXIT_OK


def cmd_eval(features_path, k=1, epsilon=1e-3, label_column=-1, csv_out=None) -> int:
    ds = data_mod.load_csv(features_path, label_column)
    report = evaluate(ds.inputs, ds.labels, k=k, epsilon=epsilon)
    sys.stdout.write(report.to_text())
    if csv_out:
        with atomic_open(csv_out, "w") as fh:
            fh.write(report.to_csv())
    return EXIT_OK


def cmd_pairs(data_spec, mode, k, out_path) -> int:
    dataset = data_mod.load_dataset(data_spec)
    pairs = _build_pairs(dataset, mode, k)
    write_csv(pairs, out_path)
    sys.stdout.write(f"pairs={len(pairs)} m_c={pairs.m_c} m_d={pairs.m_d}\n")
    return EXIT_OK


def gradcheck_instance(seed: int, m: int, layers, transfer, lambdas):
    """A random small problem with every output bounded away from zero."""
    rng = np.random.default_rng(seed)
    sizes = list(layers)
    if transfer is None:
        transfer = default_transfer(len(sizes))
    X = rng.standard_normal((m, sizes[0]))
    y = np.arange(m) % 2
    dataset = data_mod.LabeledDataset(X, y)
    net = init_random(sizes, transfer, seed=seed)
    for b in net.biases:
        b[:] = rng.uniform(-0.5, 0.5, size=b.shape)
    out = network_mod.predict(net, X)
    # shift output biases so the L1 term is differentiable at this point
    if net.transfer[-1] is TransferKind.LINEAR:
        for i in range(out.shape[1]):
            col = out[:, i]
            if np.abs(col).min() <= 1e-2:
                net.biases[-1][i] += 1.0 + np.abs(col).max()
    hp = Hyperparams.from_lambdas(lambdas)
    return net, dataset, build_full(dataset), hp


def cmd_gradcheck(seed=0, h=1e-5, m=6, layers="3,4,2", transfer=None, lambdas="0.3,0.3,0.2,0.2",
                  mode="fast", threshold=GRADCHECK_THRESHOLD, flip_sign=False) -> int:
    sizes = _int_list(layers)
    if len(sizes) < 2:
        raise UsageError("--layers needs at least input and output sizes")
    kinds = _transfer_list(transfer, len(sizes))
    lam = _lambdas(lambdas)
    try:
        net, dataset, pairs, hp = gradcheck_instance(seed, m, sizes, kinds, lam)
    except HyperparamError as exc:
        raise UsageError(str(exc)) from None
    analytic = grad_total(net, dataset, pairs, hp, mode=mode)
    if flip_sign:
        analytic = -analytic
    numeric = finite_diff_grad(net, dataset, pairs, hp, h)
    err, coord = max_relative_error(analytic, numeric)
    sys.stdout.write(f"max_relative_error={err:.3e} at {coord} (threshold {threshold:g})\n")
    if err <= threshold:
        return EXIT_OK
    sys.stderr.write(f"gradient check failed at {coord}\n")
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            return cmd_train(run_config_from_args(merge_config(args)))
        if args.command == "extract":
            args = merge_config(args)
            if not args.model or not args.out:
                raise UsageError("extract needs --model and --out")
            return cmd_extract(args.model, data_spec_from_args(args), args.out)
        if args.command == "eval":
            return cmd_eval(args.features, args.k, args.epsilon, args.label_column, args.csv_out)
        if args.command == "pairs":
            args = merge_config(args)
            if not args.out:
                raise UsageError("pairs needs --out")
            k = args.k if args.k is not None else 3
            if k < 1:
                raise UsageError("--k must be at least 1")
            return cmd_pairs(data_spec_from_args(args), args.pairs or "full", k, args.out)
        if args.command == "gradcheck":
            return cmd_gradcheck(args.seed, args.h, args.m, args.layers, args.transfer, args.lambdas,
                                 args.mode, args.threshold, args.flip_sign)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"senns: error: {exc}\n")
        return EXIT_USAGE
    except (DataError, ShapeError, DegenerateClassError, ModelFormatError, OSError, ValueError) as exc:
        sys.stderr.write(f"senns: data error: {exc}\n")
        return EXIT_DATA
    except NumericError as exc:
        sys.stderr.write(f"senns: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    parser.error(f"unknown command {args.command}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
