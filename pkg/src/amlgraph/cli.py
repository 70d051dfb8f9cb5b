"""Command-line surface: build, stats, synth, sample, vip, train, eval.

Every command is deterministic given --seed and writes a manifest
(config hash, seed, version) into its output directory. Report-shaped
commands also render figures next to the delimited files unless
--no-figures is passed. Exit codes: 0 ok, 2 config error, 3 data
integrity error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import statistics
import sys
from pathlib import Path

import numpy as np

from . import __version__, builder, dataio, metrics, model, sampling, synth, vipcache
from .errors import AmlGraphError, ConfigError, UndefinedMetricError
from .graph import TimeWindow, build_graph


def _load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return cfg


def _opt(args, config: dict, key: str, default):
    """Explicit flag > config file > built-in default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in config:
        return config[key]
    return default


def _parse_fanouts(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return sampling.check_fanouts(text)
    try:
        return sampling.check_fanouts(int(t) for t in str(text).split(","))
    except ValueError:
        raise ConfigError(f"fanouts must look like '10,10', got {text!r}") from None


def _out_dir(args, config) -> Path:
    out = Path(_opt(args, config, "out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_graph(args, config):
    cache_path = _opt(args, config, "graph_cache", None)
    if cache_path is not None and Path(cache_path).exists():
        from .graph import load_cache

        return load_cache(cache_path)
    nodes_path = _opt(args, config, "nodes", None)
    edges_path = _opt(args, config, "edges", None)
    if nodes_path is None or edges_path is None:
        raise ConfigError("--nodes and --edges are required")
    ts_name = _opt(args, config, "timestamp_col", None)
    expect_nf = _opt(args, config, "node_feature_count", None)
    expect_ef = _opt(args, config, "edge_feature_count", None)
    node_ids, node_feats = dataio.read_nodes_csv(
        nodes_path, None if expect_nf is None else int(expect_nf)
    )
    src, dst, edge_feats, ts_idx = dataio.read_edges_csv(
        edges_path, ts_name, None if expect_ef is None else int(expect_ef)
    )
    g = build_graph(node_ids, node_feats, src, dst, edge_feats, ts_idx)
    if cache_path is not None:
        from .graph import save_cache

        save_cache(g, cache_path)
    return g


def _config_echo(args, keys, config) -> dict:
    return {k: _opt(args, config, k, None) for k in keys}


# -- commands ------------------------------------------------------------


def cmd_build(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_opt(args, config, "seed", 0))
    g = _load_graph(args, config)
    labels_path = _opt(args, config, "labels", None)
    if labels_path is None:
        raise ConfigError("--labels is required")
    labels = dataio.read_labels_csv(labels_path)

    window = None
    win = _opt(args, config, "window", None)
    if win is not None:
        window = TimeWindow(int(win[0]), int(win[1]))
    cfg = builder.BuilderConfig(
        max_hops=int(_opt(args, config, "max_hops", 6)),
        seed_tx_cap=int(_opt(args, config, "seed_cap", 100)),
        activity_threshold=int(_opt(args, config, "activity_threshold", 1000)),
    )
    threads = int(_opt(args, config, "threads", 1))
    result = builder.build_dataset(g, labels, window, cfg, threads=threads)

    dataio.write_subgraphs_csv(out / "subgraphs.csv", result.records, result.graph)
    dataio.write_subgraph_labels_csv(out / "subgraph_labels.csv", result.records)
    dataio.write_json(out / "build_report.json", result.report)
    echo = {
        "max_hops": cfg.max_hops,
        "seed_cap": cfg.seed_tx_cap,
        "activity_threshold": cfg.activity_threshold,
        "window": win,
        "threads": threads,
    }
    dataio.write_manifest(out, "build", echo, seed)
    if not args.no_figures:
        from . import figures

        figures.save_size_histogram(result.report["size_histogram"], out / "subgraph_sizes.png")
    print(
        f"build: {result.report['records']['licit']} licit and "
        f"{result.report['records']['suspicious']} suspicious subgraphs "
        f"({result.report['paths']['total']} paths) -> {out}"
    )
    return 0


def cmd_stats(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    nodes_path = _opt(args, config, "nodes", None)
    edges_path = _opt(args, config, "edges", None)
    n_nodes = n_edges = None
    if nodes_path and edges_path:
        g = _load_graph(args, config)
        n_nodes, n_edges = g.node_count, g.edge_count
    else:
        g = None

    sub_path = _opt(args, config, "subgraphs", None)
    lab_path = _opt(args, config, "subgraph_labels", None)
    if sub_path is None or lab_path is None:
        raise ConfigError("--subgraphs and --subgraph-labels are required")
    sizes: dict[int, int] = {}
    _, _, body = dataio.open_rows(sub_path)
    for row in body:
        sid = int(row[0])
        sizes[sid] = sizes.get(sid, 0) + 1
    _, _, lbody = dataio.open_rows(lab_path)
    label_of = {int(r[0]): r[1] for r in lbody}

    per_class: dict[str, list[int]] = {}
    for sid, size in sizes.items():
        per_class.setdefault(label_of.get(sid, "unlabeled"), []).append(size)

    summary: dict = {"subgraphs": len(sizes)}
    if n_nodes is not None:
        summary["nodes"] = n_nodes
        summary["edges"] = n_edges
    hist: dict[str, dict[str, int]] = {}
    for cls in sorted(per_class):
        vals = per_class[cls]
        summary[cls] = {
            "count": len(vals),
            "min_nodes": min(vals),
            "median_nodes": statistics.median(vals),
            "mean_nodes": sum(vals) / len(vals),
            "max_nodes": max(vals),
        }
        counts: dict[str, int] = {}
        for v in vals:
            counts[str(v)] = counts.get(str(v), 0) + 1
        hist[cls] = counts
    dataio.write_json(out / "stats.json", summary)
    if not args.no_figures and hist:
        from . import figures

        figures.save_size_histogram(hist, out / "subgraph_sizes.png")
    for key, val in summary.items():
        print(f"{key}: {val}")
    return 0


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_opt(args, config, "seed", 0))
    params = synth.SynthParams(
        n_nodes=int(_opt(args, config, "nodes_count", 10_000)),
        n_records=int(_opt(args, config, "records", 1_000)),
        suspicious_frac=float(_opt(args, config, "suspicious_frac", 0.0227)),
        boundary_strength=float(_opt(args, config, "boundary_strength", 1.0)),
    )
    result = synth.generate(params, seed)
    dataio.write_nodes_csv(out / "nodes.csv", result.graph)
    dataio.write_edges_csv(out / "edges.csv", result.graph)
    dataio.write_subgraphs_csv(out / "subgraphs.csv", result.records, result.graph)
    dataio.write_subgraph_labels_csv(out / "subgraph_labels.csv", result.records)
    echo = {
        "nodes_count": params.n_nodes,
        "records": params.n_records,
        "suspicious_frac": params.suspicious_frac,
        "boundary_strength": params.boundary_strength,
    }
    dataio.write_manifest(out, "synth", echo, seed)
    n_sus = sum(1 for r in result.records if r.label is builder.GroupLabel.SUSPICIOUS)
    print(
        f"synth: {result.graph.node_count} nodes, {result.graph.edge_count} edges, "
        f"{len(result.records)} records ({n_sus} suspicious) -> {out}"
    )
    return 0


def _load_records(args, config, g, need_labels: bool):
    sub_path = _opt(args, config, "subgraphs", None)
    if sub_path is None:
        raise ConfigError("--subgraphs is required")
    lab_path = _opt(args, config, "subgraph_labels", None)
    if need_labels and lab_path is None:
        raise ConfigError("--subgraph-labels is required")
    return dataio.read_records(g, sub_path, lab_path)


def cmd_sample(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_opt(args, config, "seed", 0))
    g = _load_graph(args, config)
    records = _load_records(args, config, g, need_labels=False)
    fanouts = _parse_fanouts(_opt(args, config, "fanouts", "10,10"))
    batch_size = int(_opt(args, config, "batch_size", 64))
    num_batches = int(_opt(args, config, "num_batches", 1))
    direction = _opt(args, config, "direction", "both")

    order = sampling.make_minibatches(
        np.arange(len(records)), batch_size, sampling.batch_rng(seed, 0, 0)
    )
    minibatches = []
    for bi, batch in enumerate(order[:num_batches]):
        rng = sampling.batch_rng(seed, 0, bi + 1)
        recs = [records[j] for j in batch]
        minibatches.append(sampling.build_subgraph_minibatch(g, recs, fanouts, rng, direction))
    dataio.write_minibatch_jsonl(out / "minibatches.jsonl", minibatches, g)
    echo = {
        "fanouts": list(fanouts),
        "batch_size": batch_size,
        "num_batches": num_batches,
        "direction": direction,
    }
    dataio.write_manifest(out, "sample", echo, seed)
    print(f"sample: wrote {len(minibatches)} minibatches -> {out / 'minibatches.jsonl'}")
    return 0


def cmd_vip(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_opt(args, config, "seed", 0))
    g = _load_graph(args, config)
    records = _load_records(args, config, g, need_labels=False)
    fanouts = _parse_fanouts(_opt(args, config, "fanouts", "10,10"))
    batch_size = int(_opt(args, config, "batch_size", min(64, max(1, len(records)))))
    n_parts = int(_opt(args, config, "partitions", 2))
    budget = int(_opt(args, config, "cache_budget", 100))
    trials = int(_opt(args, config, "trials", 100))
    direction = _opt(args, config, "direction", "both")
    mode = _opt(args, config, "partition_mode", "random")

    aug = vipcache.augment_graph(g, records)
    train_idx = list(range(len(records)))
    vip = vipcache.vip_analysis(aug, train_idx, batch_size, fanouts, direction)
    partition = vipcache.partition_nodes(g, n_parts, seed, mode, records=records)
    policy = vipcache.build_cache_policy(vip, partition, budget)
    rand_policy = vipcache.random_cache_policy(partition, budget, np.random.default_rng(seed))
    empty_policy = vipcache.CachePolicy(
        cached=[np.empty(0, dtype=np.int64)] * n_parts, budget=0
    )

    def batches():
        for t in range(trials):
            rng = sampling.batch_rng(seed, 1, t)
            pick = rng.choice(len(records), size=min(batch_size, len(records)), replace=False)
            yield sampling.build_subgraph_minibatch(
                g, [records[int(j)] for j in pick], fanouts, rng, direction
            )

    replay = list(batches())
    reports = {
        "no_cache": vipcache.simulate_comm_volume(g, partition, empty_policy, replay),
        "random_cache": vipcache.simulate_comm_volume(g, partition, rand_policy, replay),
        "vip_cache": vipcache.simulate_comm_volume(g, partition, policy, replay),
    }
    dataio.write_vip_csv(out / "vip.csv", vip, g)
    dataio.write_json(out / "comm_report.json", reports)
    echo = {
        "batch_size": batch_size,
        "fanouts": list(fanouts),
        "partitions": n_parts,
        "cache_budget": budget,
        "trials": trials,
        "partition_mode": mode,
        "direction": direction,
    }
    dataio.write_manifest(out, "vip", echo, seed)
    if not args.no_figures:
        from . import figures

        figures.save_vip_layers(vip, out / "vip_layers.png")
        figures.save_comm_volume(reports, out / "comm_volume.png")
    print(
        "vip: remote rows no_cache={} random={} vip={} -> {}".format(
            reports["no_cache"]["remote_rows_with_cache"],
            reports["random_cache"]["remote_rows_with_cache"],
            reports["vip_cache"]["remote_rows_with_cache"],
            out,
        )
    )
    return 0


def cmd_train(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_opt(args, config, "seed", 0))
    g = _load_graph(args, config)
    records = _load_records(args, config, g, need_labels=True)
    fan = _opt(args, config, "fanouts", None)
    cfg = model.TrainConfig(
        lr=float(_opt(args, config, "lr", 0.001)),
        batch_size=int(_opt(args, config, "batch_size", 4000)),
        epochs=int(_opt(args, config, "epochs", 100)),
        pos_weight=(
            float(_opt(args, config, "pos_weight", None))
            if _opt(args, config, "pos_weight", None) is not None
            else None
        ),
        mode=_opt(args, config, "mode", "glass"),
        hidden=int(_opt(args, config, "hidden", 16)),
        fanouts=_parse_fanouts(fan) if fan else None,
        direction=_opt(args, config, "direction", "both"),
        use_node_features=bool(_opt(args, config, "use_node_features", False)),
        patience=int(_opt(args, config, "patience", 10)),
    )
    spec = sampling.SplitSpec(seed=seed)
    splits = sampling.split_dataset(len(records), spec)
    params, history = model.train(g, records, splits, cfg, seed)

    model.save_model(
        out / "model.bin",
        params,
        {"mode": cfg.mode, "use_node_features": cfg.use_node_features, "direction": cfg.direction},
    )
    dataio.write_history_csv(out / "history.csv", history)
    echo = {
        "mode": cfg.mode,
        "lr": cfg.lr,
        "batch_size": cfg.batch_size,
        "epochs": cfg.epochs,
        "hidden": cfg.hidden,
        "fanouts": list(cfg.fanouts) if cfg.fanouts else None,
        "direction": cfg.direction,
        "use_node_features": cfg.use_node_features,
        "patience": cfg.patience,
    }
    dataio.write_manifest(out, "train", echo, seed)
    if not args.no_figures:
        from . import figures

        figures.save_training_curves(history, out / "training_curves.png")
    last = history[-1]
    print(
        f"train[{cfg.mode}]: {len(history)} epochs, final loss {last['loss']:.4f}, "
        f"val PR-AUC {last['val_pr_auc']:.4f}, val ROC-AUC {last['val_roc_auc']:.4f} -> {out}"
    )
    return 0


def cmd_eval(args) -> int:
    config = _load_config(args.config)
    out = _out_dir(args, config)
    seed = int(_opt(args, config, "seed", 0))
    g = _load_graph(args, config)
    records = _load_records(args, config, g, need_labels=True)
    model_path = _opt(args, config, "model", None)
    if model_path is None:
        raise ConfigError("--model is required")
    params, meta = model.load_model(model_path)
    threshold = float(_opt(args, config, "threshold", 0.5))
    which = _opt(args, config, "split", "test")

    if which == "all":
        eval_records = records
    else:
        splits = sampling.split_dataset(len(records), sampling.SplitSpec(seed=seed))
        idx = getattr(splits, which, None)
        if idx is None:
            raise ConfigError(f"--split must be train, val, test, or all, got {which!r}")
        eval_records = [records[i] for i in idx]

    scores = model.predict_scores(
        params, g, eval_records, meta["mode"], meta["use_node_features"], meta["direction"]
    )
    labels = np.array([1 if r.label is builder.GroupLabel.SUSPICIOUS else 0 for r in eval_records])
    if len(np.unique(labels)) < 2:
        raise UndefinedMetricError(
            f"{which} split holds a single class; ranking metrics are undefined"
        )
    cm = metrics.confusion(scores, labels, threshold)
    summary = {
        "split": which,
        "records": len(eval_records),
        "threshold": threshold,
        "confusion": cm.as_dict(),
        "micro_f1": metrics.micro_f1(cm),
        "pr_auc": metrics.pr_auc(scores, labels),
        "roc_auc": metrics.roc_auc(scores, labels),
    }
    dataio.write_json(out / "metrics.json", summary)
    dataio.write_sweep_csv(out / "sweep.csv", metrics.threshold_sweep(scores, labels))
    dataio.write_manifest(out, "eval", {"threshold": threshold, "split": which}, seed)
    if not args.no_figures:
        from . import figures

        figures.save_pr_roc(scores, labels, out / "pr_roc.png")
    print(
        f"eval[{which}]: micro-F1 {summary['micro_f1']:.4f}, PR-AUC {summary['pr_auc']:.4f}, "
        f"ROC-AUC {summary['roc_auc']:.4f} -> {out}"
    )
    return 0


# -- parser ----------------------------------------------------------------


def _add_common(sp) -> None:
    sp.add_argument("--config", help="JSON file with defaults for any flag")
    sp.add_argument("--seed", type=int, help="global random seed (default 0)")
    sp.add_argument("--threads", type=int, help="worker threads (default 1)")
    sp.add_argument("--out", help="output directory (default .)")
    sp.add_argument("--no-figures", action="store_true", help="skip figure rendering")


def _add_graph_inputs(sp) -> None:
    sp.add_argument("--nodes", help="nodes CSV (node_id, features...)")
    sp.add_argument("--edges", help="edges CSV (src_id, dst_id, features...)")
    sp.add_argument("--timestamp-col", dest="timestamp_col", help="edge feature column holding timestamps")
    sp.add_argument("--graph-cache", dest="graph_cache", help="binary cache path; loaded when present, written after a CSV load")
    sp.add_argument("--node-feature-count", dest="node_feature_count", type=int, help="reject node files with a different feature column count")
    sp.add_argument("--edge-feature-count", dest="edge_feature_count", type=int, help="reject edge files with a different feature column count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amlgraph",
        description="Money-laundering subgraph dataset construction, sampling, caching analysis, and classification.",
    )
    parser.add_argument("--version", action="version", version=f"amlgraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("build", help="construct labeled subgraphs from a transaction graph")
    _add_graph_inputs(sp)
    sp.add_argument("--labels", help="cluster labels CSV (node_id,label)")
    sp.add_argument("--window", nargs=2, type=int, metavar=("START", "END"))
    sp.add_argument("--max-hops", dest="max_hops", type=int)
    sp.add_argument("--seed-cap", dest="seed_cap", type=int)
    sp.add_argument("--activity-threshold", dest="activity_threshold", type=int)
    _add_common(sp)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("stats", help="summarize a subgraph dataset")
    _add_graph_inputs(sp)
    sp.add_argument("--subgraphs")
    sp.add_argument("--subgraph-labels", dest="subgraph_labels")
    _add_common(sp)
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("synth", help="generate a synthetic planted-boundary dataset")
    sp.add_argument("--nodes-count", dest="nodes_count", type=int)
    sp.add_argument("--records", type=int)
    sp.add_argument("--suspicious-frac", dest="suspicious_frac", type=float)
    sp.add_argument("--boundary-strength", dest="boundary_strength", type=float)
    _add_common(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("sample", help="dump sampled minibatches as JSON lines")
    _add_graph_inputs(sp)
    sp.add_argument("--subgraphs")
    sp.add_argument("--subgraph-labels", dest="subgraph_labels")
    sp.add_argument("--fanouts")
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--num-batches", dest="num_batches", type=int)
    sp.add_argument("--direction", choices=("both", "out", "in"))
    _add_common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("vip", help="inclusion-probability analysis and cache simulation")
    _add_graph_inputs(sp)
    sp.add_argument("--subgraphs")
    sp.add_argument("--subgraph-labels", dest="subgraph_labels")
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--fanouts")
    sp.add_argument("--partitions", type=int)
    sp.add_argument("--cache-budget", dest="cache_budget", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--partition-mode", dest="partition_mode", choices=("random", "subgraph-aware"))
    sp.add_argument("--direction", choices=("both", "out", "in"))
    _add_common(sp)
    sp.set_defaults(func=cmd_vip)

    sp = sub.add_parser("train", help="train a subgraph classifier")
    _add_graph_inputs(sp)
    sp.add_argument("--subgraphs")
    sp.add_argument("--subgraph-labels", dest="subgraph_labels")
    sp.add_argument("--mode", choices=model.MODES)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--pos-weight", dest="pos_weight", type=float)
    sp.add_argument("--hidden", type=int)
    sp.add_argument("--fanouts")
    sp.add_argument("--patience", type=int)
    sp.add_argument("--direction", choices=("both", "out", "in"))
    sp.add_argument("--use-node-features", dest="use_node_features", action="store_const", const=True)
    _add_common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a trained model")
    _add_graph_inputs(sp)
    sp.add_argument("--subgraphs")
    sp.add_argument("--subgraph-labels", dest="subgraph_labels")
    sp.add_argument("--model")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--split", choices=("train", "val", "test", "all"))
    _add_common(sp)
    sp.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AmlGraphError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
