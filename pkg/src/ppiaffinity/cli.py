"""Command-line front end for reproducible affinity-regression experiments.

Subcommands: ``split``, ``train``, ``eval``, ``fuse``, ``batch-audit``.
Every option can also come from a flat ``key = value`` config file
(``--config``); explicit flags override file entries, which override
defaults. Each run writes a resolved-config snapshot next to its outputs,
sufficient to reproduce the run exactly. All randomness flows from one root
seed through named substreams (init, batching), and no subcommand ever
mutates its input files.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .errors import (
    AlignmentError,
    DatasetValidationError,
    ParseError,
    PpiAffinityError,
)
from .ingest import apply_exclusions, load_exclusions, parse_dataset
from .losses import LossConfig
from .metrics import evaluate
from .regressor import (
    TrainConfig,
    load_embedding_table,
    load_model,
    predict,
    save_model,
    train,
)
from .sampler import batch_coverage_report, plan_batches, save_plan
from .seeding import substream_seed
from .splitter import audit_split, load_split, make_split, save_split


class UsageError(Exception):
    """Bad flag combination or config entry; maps to exit code 2."""


def _parse_bool(raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {raw!r}")


def _parse_list(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _parse_hidden_dims(raw) -> tuple[int, ...]:
    if isinstance(raw, tuple):
        return raw
    text = str(raw).strip()
    if not text or text.lower() == "none":
        return ()
    return tuple(int(part) for part in text.split(",") if part.strip())


# dest -> (default, config-file parser); shared across subcommands that use them
_OPTION_TYPES = {
    "dataset": str,
    "format": str,
    "exclude": str,
    "tau": float,
    "test_ratio": float,
    "cap": float,
    "val_fraction": float,
    "cache_dir": str,
    "split_file": str,
    "split_name": str,
    "lam": float,
    "delta": float,
    "rank_variant": str,
    "batch_size": int,
    "epochs": int,
    "lr": float,
    "optimizer": str,
    "weight_decay": float,
    "hidden_dims": _parse_hidden_dims,
    "standardize": _parse_bool,
    "seed": int,
    "out": str,
    "embeddings": _parse_list,
    "compare": _parse_list,
    "checkpoint": str,
    "fusion_mode": str,
    "proj_dim": int,
    "dump_batch_plan": _parse_bool,
    "results_csv": str,
}

_DATASET_DEFAULTS = {"dataset": None, "format": None, "exclude": None}
_SPLITTER_DEFAULTS = {
    "tau": 20.0,
    "test_ratio": 0.40,
    "cap": 1.2,
    "val_fraction": 0.15,
    "cache_dir": None,
}
_LOSS_DEFAULTS = {"lam": 0.5, "delta": 1.0, "rank_variant": "surrogate"}
_TRAIN_DEFAULTS = {
    "batch_size": 8,
    "epochs": 50,
    "lr": 1e-3,
    "optimizer": "adam",
    "weight_decay": 0.0,
    "hidden_dims": (64, 64),
    "standardize": True,
    "dump_batch_plan": False,
}

_DEFAULTS = {
    "split": {**_DATASET_DEFAULTS, **_SPLITTER_DEFAULTS, "seed": 0, "out": None},
    "train": {
        **_DATASET_DEFAULTS,
        **_SPLITTER_DEFAULTS,
        **_LOSS_DEFAULTS,
        **_TRAIN_DEFAULTS,
        "embeddings": [],
        "split_file": None,
        "seed": 0,
        "out": None,
    },
    "eval": {
        **_DATASET_DEFAULTS,
        "embeddings": [],
        "split_file": None,
        "split_name": "test",
        "checkpoint": None,
        "results_csv": None,
        "seed": 0,
        "out": None,
    },
    "fuse": {
        **_DATASET_DEFAULTS,
        **_SPLITTER_DEFAULTS,
        **_LOSS_DEFAULTS,
        **_TRAIN_DEFAULTS,
        "embeddings": [],
        "compare": [],
        "split_file": None,
        "fusion_mode": "linear",
        "proj_dim": 64,
        "seed": 0,
        "out": None,
    },
    "batch-audit": {
        **_DATASET_DEFAULTS,
        "split_file": None,
        "batch_size": 8,
        "epochs": 1,
        "dump_batch_plan": False,
        "seed": 0,
        "out": None,
    },
}


def _add_dataset_args(sub):
    sub.add_argument("--dataset", help="dataset file (CSV or JSONL)")
    sub.add_argument("--format", choices=("csv", "jsonl"), help="dataset format")
    sub.add_argument("--exclude", help="exclusion list file (one id per line)")


def _add_splitter_args(sub):
    sub.add_argument("--tau", type=float, help="similarity threshold (edit distance)")
    sub.add_argument("--test-ratio", type=float, dest="test_ratio", help="test size target ratio")
    sub.add_argument("--cap", type=float, help="test overshoot cap factor")
    sub.add_argument("--val-fraction", type=float, dest="val_fraction",
                     help="validation fraction carved from the train side")
    sub.add_argument("--cache-dir", dest="cache_dir", help="distance matrix cache directory")


def _add_loss_args(sub):
    sub.add_argument("--lambda", type=float, dest="lam", help="Huber/rank mixture weight")
    sub.add_argument("--delta", type=float, help="Huber transition width (pKd)")
    sub.add_argument("--rank-variant", choices=("verbatim", "surrogate"),
                     dest="rank_variant", help="rank loss form")


def _add_train_args(sub):
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--lr", type=float)
    sub.add_argument("--optimizer", choices=("sgd", "adam"))
    sub.add_argument("--weight-decay", type=float, dest="weight_decay")
    sub.add_argument("--hidden-dims", dest="hidden_dims",
                     help="comma-separated hidden layer widths, empty for linear")
    sub.add_argument("--standardize", dest="standardize", action="store_true",
                     help="z-score inputs on train statistics (default)")
    sub.add_argument("--no-standardize", dest="standardize", action="store_false")
    sub.add_argument("--dump-batch-plan", dest="dump_batch_plan", action="store_true",
                     help="write the batch plan JSON for audit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppiaffinity",
        description="Protein-protein binding affinity regression harness",
    )
    subparsers = parser.add_subparsers(dest="command")

    def new_sub(name, help_text):
        sub = subparsers.add_parser(name, help=help_text, argument_default=argparse.SUPPRESS)
        sub.add_argument("--config", help="flat key = value config file")
        sub.add_argument("--seed", type=int, help="root seed for all substreams")
        sub.add_argument("--out", help="output directory")
        return sub

    sub = new_sub("split", "compute a leakage-safe train/validation/test split")
    _add_dataset_args(sub)
    _add_splitter_args(sub)

    sub = new_sub("train", "train a single-source affinity model")
    _add_dataset_args(sub)
    _add_splitter_args(sub)
    _add_loss_args(sub)
    _add_train_args(sub)
    sub.add_argument("--embeddings", action="append",
                     help="name=path embedding table (exactly one for train)")
    sub.add_argument("--split-file", dest="split_file", help="load a split instead of computing")

    sub = new_sub("eval", "evaluate a checkpoint on a split")
    _add_dataset_args(sub)
    sub.add_argument("--embeddings", action="append", help="name=path embedding table")
    sub.add_argument("--split-file", dest="split_file")
    sub.add_argument("--split-name", choices=("train", "validation", "test"),
                     dest="split_name")
    sub.add_argument("--checkpoint", help="model checkpoint to evaluate")
    sub.add_argument("--results-csv", dest="results_csv",
                     help="cumulative results CSV to append to")

    sub = new_sub("fuse", "train and evaluate a combined multi-source model")
    _add_dataset_args(sub)
    _add_splitter_args(sub)
    _add_loss_args(sub)
    _add_train_args(sub)
    sub.add_argument("--embeddings", action="append",
                     help="name=path embedding table (two or more)")
    sub.add_argument("--split-file", dest="split_file")
    sub.add_argument("--fusion-mode", choices=("linear", "mlp"), dest="fusion_mode")
    sub.add_argument("--proj-dim", type=int, dest="proj_dim")
    sub.add_argument("--compare", action="append",
                     help="eval.json of a single-source run for side-by-side reporting")

    sub = new_sub("batch-audit", "report PMID batch coverage for a dataset or split")
    _add_dataset_args(sub)
    sub.add_argument("--split-file", dest="split_file")
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--dump-batch-plan", dest="dump_batch_plan", action="store_true")

    return parser


def _read_config_file(path) -> dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for line_num, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise UsageError(f"{path}:{line_num}: expected 'key = value'")
            key, value = body.split("=", 1)
            entries[key.strip()] = value.strip()
    return entries


def _resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS[command])
    given = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in _read_config_file(config_path).items():
            dest = key.replace("-", "_")
            if dest not in cfg:
                raise UsageError(f"unknown config key {key!r} for {command}")
            cfg[dest] = _OPTION_TYPES[dest](raw)
    cfg.update(given)
    if isinstance(cfg.get("hidden_dims"), str):
        cfg["hidden_dims"] = _parse_hidden_dims(cfg["hidden_dims"])
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    for key in keys:
        if not cfg.get(key):
            raise UsageError(f"--{key.replace('_', '-')} is required")


def _prepare_out(cfg: dict, command: str) -> Path:
    _require(cfg, "out")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    snapshot = {"command": command}
    for key, value in cfg.items():
        if isinstance(value, tuple):
            value = list(value)
        snapshot[key] = value
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(snapshot, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def _load_dataset(cfg: dict):
    _require(cfg, "dataset")
    dataset = parse_dataset(cfg["dataset"], format=cfg.get("format"))
    if cfg.get("exclude"):
        dataset = apply_exclusions(dataset, load_exclusions(cfg["exclude"]))
    return dataset


def _load_tables(cfg: dict):
    specs = cfg.get("embeddings") or []
    tables = []
    for spec in specs:
        if "=" not in spec:
            raise UsageError(f"--embeddings expects name=path, got {spec!r}")
        name, path = spec.split("=", 1)
        tables.append(load_embedding_table(path.strip(), name=name.strip()))
    return tables


def _get_split(cfg: dict, dataset):
    if cfg.get("split_file"):
        return load_split(cfg["split_file"])
    return make_split(
        dataset,
        tau=cfg["tau"],
        r=cfg["test_ratio"],
        cap_factor=cfg["cap"],
        val_fraction=cfg["val_fraction"],
        cache_dir=cfg.get("cache_dir"),
    )


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig(
        lr=cfg["lr"],
        epochs=cfg["epochs"],
        optimizer=cfg["optimizer"],
        weight_decay=cfg["weight_decay"],
        seed=cfg["seed"],
        loss=LossConfig(
            lam=cfg["lam"], delta=cfg["delta"], rank_variant=cfg["rank_variant"]
        ),
        batch_size=cfg["batch_size"],
        hidden_dims=tuple(cfg["hidden_dims"]),
        standardize=cfg["standardize"],
        fusion_mode=cfg.get("fusion_mode", "linear"),
        proj_dim=cfg.get("proj_dim", 64),
    )


def _write_metric_log(log: list[dict], path: Path) -> None:
    fields = ("epoch", "train_loss", "val_pearson", "val_spearman", "val_rmse")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for entry in log:
            writer.writerow(
                [
                    entry["epoch"],
                    *(
                        "" if entry[k] is None else repr(float(entry[k]))
                        for k in fields[1:]
                    ),
                ]
            )


def _write_json(doc: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_training(cfg: dict, out: Path, tables):
    dataset = _load_dataset(cfg)
    split = _get_split(cfg, dataset)
    train_cfg = _train_config(cfg)
    plan = plan_batches(
        split.train,
        dataset.pmid_of(),
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        seed=substream_seed(cfg["seed"], "batching"),
    )
    if cfg.get("dump_batch_plan"):
        save_plan(plan, out / "batch_plan.json")
    model, log = train(dataset, split, tables, train_cfg, plan)
    save_model(model, out / "model.ckpt")
    _write_metric_log(log, out / "metrics.csv")
    return dataset, split, model, log


def cmd_split(cfg: dict) -> int:
    out = _prepare_out(cfg, "split")
    dataset = _load_dataset(cfg)
    assignment = make_split(
        dataset,
        tau=cfg["tau"],
        r=cfg["test_ratio"],
        cap_factor=cfg["cap"],
        val_fraction=cfg["val_fraction"],
        cache_dir=cfg.get("cache_dir"),
    )
    save_split(assignment, out / "split.json")
    audit = audit_split(dataset, assignment, cfg["tau"])
    _write_json(audit, out / "split_audit.json")
    print(
        f"split: {len(assignment.train)} train / {len(assignment.validation)} "
        f"validation / {len(assignment.test)} test "
        f"({len(assignment.components)} components)"
    )
    print(
        f"min cross-split distance: {audit['min_cross_split_distance']} "
        f"(tau {cfg['tau']}, {audit['n_leaky_ordered_pairs']} leaky pairs)"
    )
    return 0


def cmd_train(cfg: dict) -> int:
    tables = _load_tables(cfg)
    if len(tables) != 1:
        raise UsageError(
            "train expects exactly one --embeddings source; use fuse for combinations"
        )
    out = _prepare_out(cfg, "train")
    _, _, _, log = _run_training(cfg, out, tables)
    if log:
        last = log[-1]
        print(
            f"trained {cfg['epochs']} epochs; final train loss {last['train_loss']:.6f}, "
            f"val spearman {last['val_spearman']}"
        )
    print(f"checkpoint: {out / 'model.ckpt'}")
    return 0


def cmd_eval(cfg: dict) -> int:
    _require(cfg, "checkpoint", "split_file")
    out = _prepare_out(cfg, "eval")
    model = load_model(cfg["checkpoint"])
    dataset = _load_dataset(cfg)
    tables = _load_tables(cfg)
    split = load_split(cfg["split_file"])
    split_name = cfg["split_name"]
    ids = {"train": split.train, "validation": split.validation, "test": split.test}[
        split_name
    ]
    if split_name == "train":
        print(
            "WARNING: evaluating on the TRAIN split; scores do not reflect "
            "generalization",
            file=sys.stderr,
        )
    labels = dataset.labels()
    predictions = predict(model, tables, ids)
    report = evaluate(predictions, {cid: labels[cid] for cid in ids})
    doc = {
        "checkpoint": cfg["checkpoint"],
        "split": split_name,
        **report.to_dict(),
    }
    _write_json(doc, out / "eval.json")
    results_csv = Path(cfg["results_csv"]) if cfg.get("results_csv") else out / "results.csv"
    new_file = not results_csv.exists()
    with open(results_csv, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if new_file:
            writer.writerow(("checkpoint", "split", "n", "pearson", "spearman", "rmse"))
        writer.writerow(
            (
                cfg["checkpoint"],
                split_name,
                report.n,
                "" if report.pearson is None else repr(report.pearson),
                "" if report.spearman is None else repr(report.spearman),
                repr(report.rmse),
            )
        )
    print(
        f"eval[{split_name}] n={report.n} pearson={report.pearson} "
        f"spearman={report.spearman} rmse={report.rmse:.6f}"
    )
    return 0


def cmd_fuse(cfg: dict) -> int:
    tables = _load_tables(cfg)
    if len(tables) < 2:
        raise UsageError("fusion requires at least two --embeddings sources")
    out = _prepare_out(cfg, "fuse")
    dataset, split, model, _ = _run_training(cfg, out, tables)
    labels = dataset.labels()
    predictions = predict(model, tables, split.test)
    report = evaluate(predictions, {cid: labels[cid] for cid in split.test})
    doc = {"split": "test", "sources": [t.name for t in tables], **report.to_dict()}
    _write_json(doc, out / "eval.json")
    if cfg.get("compare"):
        baselines = {}
        for path in cfg["compare"]:
            with open(path, encoding="utf-8") as fh:
                baselines[str(path)] = json.load(fh)
        _write_json(
            {"fused": doc, "baselines": baselines}, out / "comparison.json"
        )
    print(
        f"fused[{'+'.join(t.name for t in tables)}] test pearson={report.pearson} "
        f"spearman={report.spearman} rmse={report.rmse:.6f}"
    )
    return 0


def cmd_batch_audit(cfg: dict) -> int:
    out = _prepare_out(cfg, "batch-audit")
    dataset = _load_dataset(cfg)
    if cfg.get("split_file"):
        ids = load_split(cfg["split_file"]).train
    else:
        ids = dataset.ids()
    plan = plan_batches(
        ids,
        dataset.pmid_of(),
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        seed=substream_seed(cfg["seed"], "batching"),
    )
    if cfg.get("dump_batch_plan"):
        save_plan(plan, out / "batch_plan.json")
    report = batch_coverage_report(plan)
    _write_json(report, out / "batch_audit.json")
    first = report["epochs"][0] if report["epochs"] else {}
    print(
        f"batch audit: {len(ids)} ids, {first.get('batches', 0)} batches/epoch, "
        f"singleton fraction {first.get('singleton_fraction', 0.0):.3f}"
    )
    return 0


_COMMANDS = {
    "split": cmd_split,
    "train": cmd_train,
    "eval": cmd_eval,
    "fuse": cmd_fuse,
    "batch-audit": cmd_batch_audit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(file=sys.stderr)
        return 2
    try:
        cfg = _resolve_config(args.command, args)
        return _COMMANDS[args.command](cfg)
    except (
        UsageError,
        ParseError,
        DatasetValidationError,
        AlignmentError,
        FileNotFoundError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PpiAffinityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
