"""Shared fixtures: the hand-worked construction instance and small graphs."""

from __future__ import annotations

import csv

import numpy as np
import pytest

from amlgraph.builder import ClusterLabel
from amlgraph.graph import build_graph

# A worked instance whose construction output is known by hand: eight
# walks from the labeled nodes (three licit, one illicit, three
# suspicious, one neutral), yielding one licit subgraph {14,15,17}, one
# suspicious subgraph {4,5,7,8,9,10,11}, and an inconsistent pair
# {21,22}. Node 18 is an unlabeled connector that makes the instance one
# weak component without adding any walk (nothing can reach it).
WALKTHROUGH_EDGES = [
    (13, 14), (14, 15), (15, 19),
    (16, 17), (17, 15),
    (23, 22), (22, 24),
    (1, 7), (7, 4), (4, 5), (5, 6),
    (7, 8), (8, 9), (9, 12), (8, 10), (10, 11), (11, 12),
    (20, 21), (21, 22),
    (1, 2), (2, 3),
    (18, 1), (18, 13), (18, 20),
]

WALKTHROUGH_LABELS = {
    1: ClusterLabel.ILLICIT,
    6: ClusterLabel.ILLICIT,
    20: ClusterLabel.ILLICIT,
    12: ClusterLabel.LICIT,
    13: ClusterLabel.LICIT,
    16: ClusterLabel.LICIT,
    19: ClusterLabel.LICIT,
    23: ClusterLabel.LICIT,
    24: ClusterLabel.LICIT,
}


def make_graph(edges, n_nodes=None, node_ids=None, timestamps=None, timestamp_col=0):
    """Graph from an edge list; timestamps default to the edge position."""
    if node_ids is None:
        if n_nodes is not None:
            node_ids = np.arange(n_nodes, dtype=np.int64)
        else:
            node_ids = np.array(sorted({v for e in edges for v in e}), dtype=np.int64)
    else:
        node_ids = np.asarray(node_ids, dtype=np.int64)
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    if timestamps is None:
        timestamps = np.arange(len(edges), dtype=np.int64)
    feats = np.asarray(timestamps, dtype=np.int64).reshape(-1, 1)
    node_feats = np.zeros((len(node_ids), 1), dtype=np.int64)
    return build_graph(node_ids, node_feats, src, dst, feats, timestamp_col=timestamp_col)


@pytest.fixture
def walkthrough_graph():
    return make_graph(WALKTHROUGH_EDGES)


@pytest.fixture
def walkthrough_labels():
    return dict(WALKTHROUGH_LABELS)


def write_walkthrough_csvs(directory):
    """The worked instance as CSV inputs for the CLI."""
    nodes = sorted({v for e in WALKTHROUGH_EDGES for v in e})
    nodes_path = directory / "nodes.csv"
    with open(nodes_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "f0"])
        for v in nodes:
            w.writerow([v, 0])
    edges_path = directory / "edges.csv"
    with open(edges_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src_id", "dst_id", "timestamp"])
        for t, (a, b) in enumerate(WALKTHROUGH_EDGES):
            w.writerow([a, b, t])
    labels_path = directory / "labels.csv"
    with open(labels_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "label"])
        for v, lab in sorted(WALKTHROUGH_LABELS.items()):
            w.writerow([v, lab.value])
    return nodes_path, edges_path, labels_path


def random_multigraph(rng, n_nodes, n_edges, self_loops=True):
    """Random directed multigraph tables for property tests."""
    node_ids = np.arange(n_nodes, dtype=np.int64)
    src = rng.integers(0, n_nodes, size=n_edges)
    dst = rng.integers(0, n_nodes, size=n_edges)
    if not self_loops:
        loops = src == dst
        dst[loops] = (dst[loops] + 1) % n_nodes
    ts = rng.integers(0, 100, size=n_edges)
    return make_graph(list(zip(src.tolist(), dst.tolist())), n_nodes=n_nodes, timestamps=ts)
