"""Readers and writers for the CSV/JSON interchange formats.

All delimited files carry headers. Node files put `node_id` first, edge
files `src_id,dst_id`; everything after those columns is an ordinal
integer feature. Parse errors name the file and line.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .builder import ClusterLabel, GroupLabel, SubgraphRecord
from .errors import DataError
from .graph import BackgroundGraph

FORMAT_VERSION = "0.1.0"


def open_rows(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise DataError(f"{path}: empty file, expected a header row")
    return path, rows[0], rows[1:]


def _to_int(path, lineno, value, what):
    try:
        return int(value)
    except ValueError:
        raise DataError(f"{path}:{lineno}: {what} {value!r} is not an integer") from None


def read_nodes_csv(path, expect_features: int | None = None):
    """-> (external ids, feature matrix)."""
    path, header, body = open_rows(path)
    if not header or header[0] != "node_id":
        raise DataError(f"{path}:1: first column must be node_id, got {header[:1]}")
    n_feat = len(header) - 1
    if expect_features is not None and n_feat != expect_features:
        raise DataError(
            f"{path}:1: header has {n_feat} feature columns, configuration expects {expect_features}"
        )
    ids = np.empty(len(body), dtype=np.int64)
    feats = np.empty((len(body), n_feat), dtype=np.int64)
    for i, row in enumerate(body):
        lineno = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        ids[i] = _to_int(path, lineno, row[0], "node_id")
        for j in range(n_feat):
            feats[i, j] = _to_int(path, lineno, row[j + 1], f"feature {header[j + 1]}")
    return ids, feats


def read_edges_csv(path, timestamp_col: str | None = None, expect_features: int | None = None):
    """-> (src, dst, feature matrix, timestamp column index or None)."""
    path, header, body = open_rows(path)
    if len(header) < 2 or header[0] != "src_id" or header[1] != "dst_id":
        raise DataError(f"{path}:1: first columns must be src_id,dst_id, got {header[:2]}")
    feat_names = header[2:]
    if expect_features is not None and len(feat_names) != expect_features:
        raise DataError(
            f"{path}:1: header has {len(feat_names)} feature columns, "
            f"configuration expects {expect_features}"
        )
    ts_idx = None
    if timestamp_col is not None:
        if timestamp_col not in feat_names:
            raise DataError(f"{path}:1: timestamp column {timestamp_col!r} not in header")
        ts_idx = feat_names.index(timestamp_col)
    src = np.empty(len(body), dtype=np.int64)
    dst = np.empty(len(body), dtype=np.int64)
    feats = np.empty((len(body), len(feat_names)), dtype=np.int64)
    for i, row in enumerate(body):
        lineno = i + 2
        if len(row) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        src[i] = _to_int(path, lineno, row[0], "src_id")
        dst[i] = _to_int(path, lineno, row[1], "dst_id")
        for j in range(len(feat_names)):
            feats[i, j] = _to_int(path, lineno, row[j + 2], f"feature {feat_names[j]}")
    return src, dst, feats, ts_idx


def read_labels_csv(path) -> dict[int, ClusterLabel]:
    path, header, body = open_rows(path)
    if header[:2] != ["node_id", "label"]:
        raise DataError(f"{path}:1: expected header node_id,label")
    labels: dict[int, ClusterLabel] = {}
    for i, row in enumerate(body):
        lineno = i + 2
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 columns")
        node = _to_int(path, lineno, row[0], "node_id")
        try:
            lab = ClusterLabel(row[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: label must be licit or illicit, got {row[1]!r}") from None
        if node in labels and labels[node] is not lab:
            raise DataError(f"{path}:{lineno}: node {node} labeled both licit and illicit")
        labels[node] = lab
    return labels


def write_nodes_csv(path, g: BackgroundGraph) -> None:
    header = ["node_id"] + [f"f{i}" for i in range(g.node_feature_count)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for ext, feats in zip(g.external_ids.tolist(), g.node_features.tolist()):
            w.writerow([ext] + feats)


def write_edges_csv(path, g: BackgroundGraph) -> None:
    names = [f"e{i}" for i in range(g.edge_feature_count)]
    if g.timestamp_col is not None:
        names[g.timestamp_col] = "timestamp"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src_id", "dst_id"] + names)
        ext = g.external_ids
        for s, d, feats in zip(g.edge_src.tolist(), g.edge_dst.tolist(), g.edge_features.tolist()):
            w.writerow([ext[s], ext[d]] + feats)


def write_subgraphs_csv(path, records, g: BackgroundGraph) -> None:
    """Membership rows (subgraph_id, node_id) in external ids."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subgraph_id", "node_id"])
        for rec in records:
            for ext in g.to_external(np.asarray(rec.nodes)).tolist():
                w.writerow([rec.id, ext])


def write_subgraph_labels_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subgraph_id", "label"])
        for rec in records:
            w.writerow([rec.id, rec.label.value])


def read_records(g: BackgroundGraph, subgraphs_path, labels_path=None) -> list[SubgraphRecord]:
    """Load subgraph records back into internal node ids."""
    path, header, body = open_rows(subgraphs_path)
    if header[:2] != ["subgraph_id", "node_id"]:
        raise DataError(f"{path}:1: expected header subgraph_id,node_id")
    membership: dict[int, list[int]] = {}
    for i, row in enumerate(body):
        lineno = i + 2
        if len(row) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 columns")
        sid = _to_int(path, lineno, row[0], "subgraph_id")
        node = _to_int(path, lineno, row[1], "node_id")
        membership.setdefault(sid, []).append(node)

    labels: dict[int, GroupLabel] = {}
    if labels_path is not None:
        lpath, lheader, lbody = open_rows(labels_path)
        if lheader[:2] != ["subgraph_id", "label"]:
            raise DataError(f"{lpath}:1: expected header subgraph_id,label")
        for i, row in enumerate(lbody):
            lineno = i + 2
            sid = _to_int(lpath, lineno, row[0], "subgraph_id")
            try:
                labels[sid] = GroupLabel(row[1])
            except ValueError:
                raise DataError(f"{lpath}:{lineno}: unknown label {row[1]!r}") from None

    records = []
    for sid in sorted(membership):
        internal = g.to_internal(np.asarray(sorted(set(membership[sid])), dtype=np.int64))
        records.append(
            SubgraphRecord(id=sid, nodes=tuple(internal.tolist()), label=labels.get(sid))
        )
    return records


# -- reports and manifests ----------------------------------------------


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(out_dir, command: str, cfg: dict, seed: int) -> None:
    write_json(
        Path(out_dir) / "manifest.json",
        {
            "command": command,
            "config": cfg,
            "config_hash": config_hash(cfg),
            "seed": seed,
            "version": FORMAT_VERSION,
        },
    )


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "tp", "fn", "fp", "tn", "precision", "recall"])
        for r in rows:
            w.writerow(
                [
                    f"{r['threshold']:.4f}",
                    r["tp"],
                    r["fn"],
                    r["fp"],
                    r["tn"],
                    f"{r['precision']:.6f}",
                    f"{r['recall']:.6f}",
                ]
            )


def write_vip_csv(path, vip, g: BackgroundGraph) -> None:
    """Nonzero probabilities per (real node, layer), external ids."""
    ext = g.external_ids
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "layer", "probability"])
        for layer in range(vip.n_layers):
            row = vip.probs[layer, : vip.n_real]
            for v in np.nonzero(row > 0)[0].tolist():
                w.writerow([ext[v], layer, f"{row[v]:.8f}"])


def write_history_csv(path, history) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "val_pr_auc", "val_roc_auc"])
        for h in history:
            w.writerow(
                [h["epoch"], f"{h['loss']:.8f}", f"{h['val_pr_auc']:.6f}", f"{h['val_roc_auc']:.6f}"]
            )


def write_minibatch_jsonl(path, minibatches, g: BackgroundGraph) -> None:
    """One JSON object per minibatch, node ids in the external space."""
    ext = g.external_ids
    with open(path, "w") as fh:
        for i, mb in enumerate(minibatches):
            obj = {
                "batch": i,
                "node_list": ext[mb.node_list].tolist(),
                "ranges": [list(r) for r in mb.subgraph_ranges],
                "layers": [ext[edges].tolist() for edges in mb.layer_edges],
                "record_ids": mb.record_ids,
            }
            if mb.labels is not None:
                obj["labels"] = mb.labels.tolist()
            fh.write(json.dumps(obj, sort_keys=True) + "\n")
