"""Command-line surface: dataset generation, training, evaluation, and the
hyper-parameter / adjacency-filter experiment harnesses.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.  The
SSTGCN_THREADS environment variable caps how many experiment cells run in
parallel processes (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import model as mdl
from . import report as rpt
from . import training as tr
from .roadgraph import FILTER_KINDS

METRIC_COLUMNS = ("Loss", "Precision", "Recall", "F1-Score", "Binary Accuracy", "AUC")
GRID_COLUMNS = ("KHOP/SeqNum/Interval",) + METRIC_COLUMNS
FILTER_COLUMNS = ("Preprocessing",) + METRIC_COLUMNS

FILTER_LABELS = {
    "adj-gcn": "Adjacent Matrix + GCN Filter",
    "adj-lap": "Adjacent Matrix + Normalized Laplacian Filter",
    "dist-gcn": "Distance Matrix + GCN Filter",
    "dist-lap": "Distance Matrix + Normalized Laplacian Filter",
}


class ConfigError(ValueError):
    """Bad config file or incompatible inputs (exit code 2)."""


def _load_json(path, what: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"{what} not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{what} is not valid JSON: {path}: {e}") from e


def _gen_config(args, scalar_assembly: bool = True) -> ds.GeneratorConfig:
    doc = _load_json(args.config, "generator config") if args.config else {}
    try:
        cfg = ds.GeneratorConfig.from_json(doc)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad generator config: {e}") from e
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg = cfg.with_assembly(filter_kind=getattr(args, "filter", None))
    if scalar_assembly:
        # grid passes comma lists in these flags; they are handled per cell
        cfg = cfg.with_assembly(
            n=getattr(args, "seq_num", None),
            k=getattr(args, "interval", None),
            khop=getattr(args, "khop", None),
        )
    return cfg


def _train_config(args) -> tr.TrainConfig:
    doc = _load_json(args.config, "train config") if getattr(args, "config", None) else {}
    try:
        cfg = tr.TrainConfig.from_json(doc)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad train config: {e}") from e
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "max_epochs", None) is not None:
        cfg = replace(cfg, max_epochs=args.max_epochs)
    return cfg


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, columns, rows) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(columns)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _report_row(report: tr.MetricsReport) -> list:
    return [
        report.loss,
        report.precision,
        report.recall,
        report.f1,
        report.binary_accuracy,
        report.auc,
    ]


# --- gen -----------------------------------------------------------------------


def cmd_gen(args) -> int:
    cfg = _gen_config(args)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    net, streams, sset = ds.generate_dataset(cfg)
    ds.save_dataset(sset, out)
    net.save(out.with_suffix(out.suffix + ".network.json"))
    ds.save_streams(streams, out.with_suffix(out.suffix + ".streams.npz"))
    positives = int(sset.labels().sum())
    print(f"dataset: {out}")
    print(f"samples: {len(sset)} (positives: {positives})")
    print(f"roads: {len(net.roads)}  accidents: {len(streams.accidents)}  days: {cfg.days}")
    print(f"khop={cfg.khop} n={cfg.n} k={cfg.k} filter={cfg.filter_kind}")
    return 0


# --- train ---------------------------------------------------------------------


def cmd_train(args) -> int:
    tcfg = _train_config(args)
    sset = ds.load_dataset(args.dataset)
    labels = sset.labels()
    if labels.min() == labels.max():
        raise ConfigError("dataset has a single class; cannot train")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_set, val_set, test_set = ds.split_dataset(sset, seed=tcfg.seed)
    params = mdl.ModelParams(seed=tcfg.seed)
    params, history = tr.train(train_set, val_set, params, tcfg)

    mdl.save_checkpoint(params, out_dir / "checkpoint.json")
    tr.history_to_csv(history, out_dir / "history.csv")
    rpt.plot_history(history, out_dir / "history.png")
    ds.save_dataset(test_set, out_dir / "test_split.jsonl")
    test_report = tr.evaluate(test_set, params)
    _atomic_write(
        out_dir / "test_report.json", json.dumps(test_report.to_dict(), indent=2) + "\n"
    )
    print(f"epochs: {len(history)} (best: {history[0]['best_epoch']})")
    print(f"val_auc at best epoch: {max(r['val_auc'] for r in history):.4f}")
    print(f"test: {json.dumps(test_report.to_dict())}")
    print(f"wrote {out_dir}/checkpoint.json, history.csv, history.png, test_report.json")
    return 0


# --- eval ----------------------------------------------------------------------


def cmd_eval(args) -> int:
    try:
        params = mdl.load_checkpoint(args.checkpoint)
    except mdl.CheckpointError as e:
        raise ConfigError(str(e)) from e
    sset = ds.load_dataset(args.dataset)
    expected = params.config.node_features
    for s in sset:
        if s.slices and s.slices[0].shape[1] != expected:
            raise ConfigError(
                f"dataset feature width {s.slices[0].shape[1]} != model's {expected}"
            )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    scores, labels = tr.scores_and_labels(sset, params)
    losses = [tr.bce_value(p, float(y)) for p, y in zip(scores, labels)]
    report = tr.classification_metrics(scores, labels, loss=float(np.mean(losses)))
    points = tr.roc_points(scores, labels)

    _atomic_write(out_dir / "report.json", json.dumps(report.to_dict(), indent=2) + "\n")
    _write_csv(out_dir / "roc.csv", ("fpr", "tpr"), points)
    rpt.plot_roc(points, report.auc, out_dir / "roc.png")
    print(json.dumps(report.to_dict()))
    print(f"wrote {out_dir}/report.json, roc.csv, roc.png")
    return 0


# --- experiment harness ----------------------------------------------------------


def _train_once(sset: ds.SampleSet, tcfg: tr.TrainConfig, seed: int) -> tr.MetricsReport:
    train_set, val_set, test_set = ds.split_dataset(sset, seed=seed)
    params = mdl.ModelParams(seed=seed)
    params, _ = tr.train(train_set, val_set, params, replace(tcfg, seed=seed))
    return tr.evaluate(test_set, params)


def _run_cell(payload) -> dict:
    """One experiment cell: assemble a dataset variant, train `repeats` times.

    Top-level so process pools can pickle it; the world is passed by value.
    """
    (net_doc, streams, khop, n, k, filter_kind, repeats, tcfg_doc, base_seed, cell_idx) = payload
    try:
        net = ds.RoadNetwork.from_json(net_doc)
        tcfg = tr.TrainConfig.from_json(tcfg_doc)
        sset = ds.assemble_dataset(
            net, streams, n, k, khop, filter_kind, seed=base_seed + 7000 + cell_idx
        )
        reports = []
        for rep in range(repeats):
            seed = base_seed + 10000 * (cell_idx + 1) + rep
            reports.append(_train_once(sset, tcfg, seed))
        raws = [_report_row(r) for r in reports]
        means = [float(np.mean(col)) for col in zip(*raws)]
        return {"means": means, "raws": raws, "n_samples": len(sset)}
    except Exception as e:  # cell failures are recorded, the run continues
        return {"error": f"{type(e).__name__}: {e}"}


def _run_cells(cells, net, streams, repeats, tcfg, base_seed):
    payloads = [
        (net.to_json(), streams, khop, n, k, kind, repeats, _tcfg_doc(tcfg), base_seed, i)
        for i, (khop, n, k, kind) in enumerate(cells)
    ]
    workers = max(1, int(os.environ.get("SSTGCN_THREADS", "1")))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_cell, payloads))
    return [_run_cell(p) for p in payloads]


def _tcfg_doc(tcfg: tr.TrainConfig) -> dict:
    return {f: getattr(tcfg, f) for f in tr.TrainConfig.__dataclass_fields__}


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"{flag} expects a comma-separated integer list, got {text!r}") from e
    if not values:
        raise ConfigError(f"{flag} must not be empty")
    return values


def _print_argmax(rows: list[tuple[str, list[float]]]) -> None:
    """Best row per metric column (min for Loss, max elsewhere)."""
    if not rows:
        return
    for col, name in enumerate(METRIC_COLUMNS):
        valid = [(label, vals[col]) for label, vals in rows if np.isfinite(vals[col])]
        if not valid:
            continue
        pick = min(valid, key=lambda p: p[1]) if name == "Loss" else max(valid, key=lambda p: p[1])
        print(f"best {name}: {pick[0]} ({pick[1]:.4f})")


def cmd_grid(args) -> int:
    gcfg = _gen_config(args, scalar_assembly=False)
    tcfg = _train_config_from(args)
    khops = _parse_int_list(args.khop, "--khop")
    seq_nums = _parse_int_list(args.seq_num, "--seq-num")
    intervals = _parse_int_list(args.interval, "--interval")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    net, streams = ds.generate_world(gcfg)  # shared world: only (K, n, k) varies
    cells = [(K, n, k, gcfg.filter_kind) for K in khops for n in seq_nums for k in intervals]
    results = _run_cells(cells, net, streams, args.repeats, tcfg, gcfg.seed)

    rows = []
    raw_rows = []
    labeled = []
    failures = []
    for (K, n, k, kind), res in zip(cells, results):
        label = f"{K}/{n}/{k}"
        if "error" in res:
            failures.append((label, res["error"]))
            rows.append([label] + [float("nan")] * len(METRIC_COLUMNS))
            continue
        rows.append([label] + res["means"])
        labeled.append((label, res["means"]))
        for rep, raw in enumerate(res["raws"]):
            raw_rows.append([label, rep] + raw)

    _write_csv(out_dir / "grid.csv", GRID_COLUMNS, rows)
    _write_csv(out_dir / "grid_raw.csv", ("KHOP/SeqNum/Interval", "repeat") + METRIC_COLUMNS, raw_rows)
    if labeled:
        rpt.plot_metric_bars(
            [l for l, _ in labeled], [v[-1] for _, v in labeled], "test AUC", out_dir / "grid.png"
        )
    print(f"grid: {len(cells)} cells, repeats={args.repeats}")
    _print_argmax(labeled)
    if failures:
        print(f"failed cells ({len(failures)}):", file=sys.stderr)
        for label, err in failures:
            print(f"  {label}: {err}", file=sys.stderr)
    print(f"wrote {out_dir}/grid.csv, grid_raw.csv, grid.png")
    return 0


def cmd_filters(args) -> int:
    gcfg = _gen_config(args)
    tcfg = _train_config_from(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    net, streams = ds.generate_world(gcfg)
    cells = [(gcfg.khop, gcfg.n, gcfg.k, kind) for kind in FILTER_KINDS]
    results = _run_cells(cells, net, streams, args.repeats, tcfg, gcfg.seed)

    rows = []
    labeled = []
    failures = []
    raw_rows = []
    for (K, n, k, kind), res in zip(cells, results):
        label = FILTER_LABELS[kind]
        if "error" in res:
            failures.append((label, res["error"]))
            rows.append([label] + [float("nan")] * len(METRIC_COLUMNS))
            continue
        rows.append([label] + res["means"])
        labeled.append((label, res["means"]))
        for rep, raw in enumerate(res["raws"]):
            raw_rows.append([label, rep] + raw)

    _write_csv(out_dir / "filters.csv", FILTER_COLUMNS, rows)
    _write_csv(out_dir / "filters_raw.csv", ("Preprocessing", "repeat") + METRIC_COLUMNS, raw_rows)
    if labeled:
        rpt.plot_metric_bars(
            [l for l, _ in labeled], [v[-1] for _, v in labeled], "test AUC", out_dir / "filters.png"
        )
    print(f"filters: khop={gcfg.khop} n={gcfg.n} k={gcfg.k}, repeats={args.repeats}")
    _print_argmax(labeled)
    if failures:
        print(f"failed variants ({len(failures)}):", file=sys.stderr)
        for label, err in failures:
            print(f"  {label}: {err}", file=sys.stderr)
    print(f"wrote {out_dir}/filters.csv, filters_raw.csv, filters.png")
    return 0


def _train_config_from(args) -> tr.TrainConfig:
    doc = _load_json(args.train_config, "train config") if args.train_config else {}
    try:
        cfg = tr.TrainConfig.from_json(doc)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"bad train config: {e}") from e
    if args.max_epochs is not None:
        cfg = replace(cfg, max_epochs=args.max_epochs)
    return cfg


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sstgcn",
        description="Minute-level road-level accident risk: datasets, training, experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic dataset (JSONL + network + streams)")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--out", required=True, help="output dataset path (.jsonl)")
    p.add_argument("--seed", type=int)
    p.add_argument("--khop", type=int)
    p.add_argument("--seq-num", dest="seq_num", type=int)
    p.add_argument("--interval", type=int)
    p.add_argument("--filter", choices=FILTER_KINDS)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="split 8:1:1, train, write checkpoint/history/report")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", help="train config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset; write report + ROC")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="K-hop / sequence-number / interval grid experiment")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--train-config", dest="train_config", help="train config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--khop", default="1,2,3,4")
    p.add_argument("--seq-num", dest="seq_num", default="2,3,4")
    p.add_argument("--interval", default="5,10,15")
    p.add_argument("--filter", choices=FILTER_KINDS)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("filters", help="compare the four adjacency preprocessing variants")
    p.add_argument("--config", help="generator config JSON")
    p.add_argument("--train-config", dest="train_config", help="train config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--khop", type=int, default=2)
    p.add_argument("--seq-num", dest="seq_num", type=int, default=3)
    p.add_argument("--interval", type=int, default=5)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.set_defaults(func=cmd_filters)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ds.ParseError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
