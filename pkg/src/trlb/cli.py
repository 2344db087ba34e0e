"""Command-line entry point: generate, split, train, evaluate.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O or data
format error, 3 numeric failure during training.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import tensor_store
from .errors import DomainError, FormatError, NumericError, ParseError
from .metrics import evaluate
from .model import load_model, save_model
from .synth import SynthSpec, generate
from .trainer import TrainConfig, train, train_cp_baseline

_TRAIN_DEFAULTS = {
    "rank": 3,
    "lambda1": 1e-4,
    "lambda2": 1e-4,
    "epochs": 100,
    "patience": 10,
    "min_delta": 0.0,
    "seed": 0,
    "eps": 1e-12,
    "family": "tr",
    "bias_enabled": True,
    "threads": 1,
}

_KEY_PARSERS = {
    "rank": int,
    "lambda1": float,
    "lambda2": float,
    "epochs": int,
    "patience": int,
    "min_delta": float,
    "seed": int,
    "eps": float,
    "family": str,
    "bias_enabled": lambda s: {"true": True, "false": False}[s.lower()],
    "threads": int,
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; this project reserves 2
    # for I/O errors, so route usage problems through exit code 1.
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _read_config_file(path):
    """Parse a `key = value` config file; returns (values, problems)."""
    values = {}
    problems = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                problems.append(f"{path}: line {lineno}: expected 'key = value'")
                continue
            key, _, value = (part.strip() for part in line.partition("="))
            if key not in _KEY_PARSERS:
                problems.append(f"{path}: line {lineno}: unknown key {key!r}")
                continue
            try:
                values[key] = _KEY_PARSERS[key](value)
            except (ValueError, KeyError):
                problems.append(f"{path}: line {lineno}: bad value for {key}: {value!r}")
    return values, problems


def _effective_train_config(args):
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    effective = dict(_TRAIN_DEFAULTS)
    problems = []
    if args.config is not None:
        file_values, problems = _read_config_file(args.config)
        effective.update(file_values)
    for key in ("rank", "lambda1", "lambda2", "epochs", "patience",
                "min_delta", "seed", "eps", "family", "threads"):
        flag = getattr(args, key)
        if flag is not None:
            effective[key] = flag
    if args.bias_disabled:
        effective["bias_enabled"] = False

    cfg = TrainConfig(
        rank=effective["rank"],
        lambda1=effective["lambda1"],
        lambda2=effective["lambda2"],
        max_epochs=effective["epochs"],
        patience=effective["patience"],
        min_delta=effective["min_delta"],
        seed=effective["seed"],
        eps=effective["eps"],
        bias_enabled=effective["bias_enabled"],
    )
    problems.extend(cfg.problems())
    if effective["family"] not in ("tr", "cp"):
        problems.append(f"family must be 'tr' or 'cp', got {effective['family']!r}")
    if effective["threads"] < 1:
        problems.append(f"threads must be >= 1, got {effective['threads']}")
    return effective, cfg, problems


def _write_effective_config(effective, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key in sorted(effective):
            value = effective[key]
            if isinstance(value, bool):
                text = "true" if value else "false"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            fh.write(f"{key} = {text}\n")


def _load_dataset(args):
    dims = tuple(args.dims) if args.dims else None
    return tensor_store.load_entries(args.data, fmt=args.format, dims=dims)


def _add_dataset_args(p):
    p.add_argument("data", help="dataset file, one 'i j k weight' line per entry")
    p.add_argument("--format", choices=("tsv", "csv"), default="tsv",
                   help="field separator: whitespace (tsv) or comma (csv)")
    p.add_argument("--dims", type=int, nargs=3, metavar=("I", "J", "K"),
                   help="override mode sizes (default: max index + 1)")


def cmd_split(args):
    tensor = _load_dataset(args)
    sp = tensor_store.split(tensor, args.seed)
    tensor_store.write_split_manifest(sp, args.manifest)
    print(f"split: {sp.train.size} train / {sp.val.size} val / {sp.test.size} test "
          f"-> {args.manifest}")
    return 0


def cmd_train(args):
    effective, cfg, problems = _effective_train_config(args)
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        return 1

    tensor = _load_dataset(args)
    sp = tensor_store.read_split_manifest(args.manifest)
    if sp.n_entries != tensor.n_entries:
        raise DomainError(
            f"manifest covers {sp.n_entries} entries but dataset has {tensor.n_entries}"
        )

    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    _write_effective_config(effective, outdir / "config.txt")

    fit = train if effective["family"] == "tr" else train_cp_baseline
    csv_path = outdir / "epochs.csv"
    with open(csv_path, "w", encoding="utf-8", newline="\n") as csv:
        csv.write("epoch,objective,train_rmse,val_rmse,val_mae,seconds\n")

        def on_epoch(st, seconds):
            csv.write(f"{st.epoch},{st.objective!r},{st.train_rmse!r},"
                      f"{st.val_rmse!r},{st.val_mae!r},{seconds:.6f}\n")

        try:
            model, stats = fit(tensor, sp, cfg, threads=effective["threads"],
                               on_epoch=on_epoch)
        except NumericError as err:
            last_good = (err.epoch or 1) - 1
            print(f"error: {err} (last good epoch: {last_good})", file=sys.stderr)
            return 3

    checkpoint = outdir / "checkpoint.bin"
    save_model(model, checkpoint)
    best_epoch = min(stats, key=lambda s: s.val_rmse).epoch
    val_report = evaluate(model, tensor, sp.val)
    test_report = evaluate(model, tensor, sp.test)
    summary = {
        "family": effective["family"],
        "rank": cfg.rank,
        "dims": list(tensor.dims),
        "n_entries": tensor.n_entries,
        "seed": cfg.seed,
        "split_seed": sp.seed,
        "bias_enabled": cfg.bias_enabled,
        "epochs_run": len(stats),
        "best_epoch": best_epoch,
        "val": val_report.as_dict(),
        "test": test_report.as_dict(),
    }
    with open(outdir / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(summary, indent=2, sort_keys=True))
        fh.write("\n")
    print(f"train: {len(stats)} epochs, best epoch {best_epoch}, "
          f"val RMSE {val_report.rmse!r}, test RMSE {test_report.rmse!r}")
    return 0


def cmd_evaluate(args):
    model = load_model(args.checkpoint)
    tensor = _load_dataset(args)
    if tuple(model.dims) != tuple(tensor.dims):
        raise DomainError(
            f"checkpoint dims {tuple(model.dims)} do not match dataset dims {tensor.dims}"
        )
    if args.subset == "all":
        positions = np.arange(tensor.n_entries)
    else:
        if args.manifest is None:
            raise _UsageError(f"--manifest is required for subset {args.subset!r}")
        sp = tensor_store.read_split_manifest(args.manifest)
        if sp.n_entries != tensor.n_entries:
            raise DomainError(
                f"manifest covers {sp.n_entries} entries but dataset has {tensor.n_entries}"
            )
        positions = sp.subset(args.subset)
    report = evaluate(model, tensor, positions)
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def cmd_generate(args):
    spec = SynthSpec(
        dims=tuple(args.dims),
        true_rank=args.rank,
        density=args.density,
        noise_sigma=args.noise_sigma,
        weight_scale=args.weight_scale,
        seed=args.seed,
        family=args.family,
    )
    tensor, truth = generate(spec)
    header = (
        f"seed {spec.seed}",
        f"family {spec.family} true-rank {spec.true_rank}",
        f"density {spec.density!r} noise-sigma {spec.noise_sigma!r} "
        f"weight-scale {spec.weight_scale!r}",
    )
    tensor_store.write_entries(tensor, args.out, fmt=args.format, header=header)
    truth_path = args.truth or f"{args.out}.truth"
    save_model(truth, truth_path)
    print(f"generate: {tensor.n_entries} entries -> {args.out}; "
          f"ground truth -> {truth_path}")
    return 0


def build_parser():
    parser = _Parser(prog="trlb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("split", help="partition a dataset 7:1:2 and write a manifest")
    _add_dataset_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--manifest", required=True, help="manifest output path")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a model and write checkpoint + logs")
    _add_dataset_args(p)
    p.add_argument("--manifest", required=True, help="split manifest from `trlb split`")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--config", help="key = value config file (flags override it)")
    p.add_argument("--rank", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--min-delta", dest="min_delta", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--family", choices=("tr", "cp"))
    p.add_argument("--bias-disabled", action="store_true",
                   help="train without the linear-bias term (bias stays zero)")
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset subset")
    _add_dataset_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", help="required unless --subset all")
    p.add_argument("--subset", choices=("train", "val", "test", "all"), default="test")
    p.add_argument("--out", help="also write the JSON report to this file")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("generate", help="write a synthetic dataset + ground truth")
    p.add_argument("--dims", type=int, nargs=3, metavar=("I", "J", "K"), required=True)
    p.add_argument("--rank", type=int, default=3, help="ground-truth rank")
    p.add_argument("--density", type=float, default=0.1)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float, default=0.0)
    p.add_argument("--weight-scale", dest="weight_scale", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", choices=("tr", "cp"), default="tr")
    p.add_argument("--format", choices=("tsv", "csv"), default="tsv")
    p.add_argument("--out", required=True, help="dataset output path")
    p.add_argument("--truth", help="ground-truth checkpoint path (default: <out>.truth)")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as err:
        print(str(err), file=sys.stderr)
        return 1
    except NumericError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except (ParseError, FormatError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        name = err.filename or ""
        print(f"error: {err.strerror or err}: {name}".rstrip(": "), file=sys.stderr)
        return 2


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
