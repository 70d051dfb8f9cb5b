"""Construction of labeled subgraph records from a background graph.

The pipeline walks outgoing transactions of labeled clusters, classifies
the resulting paths by their endpoints, merges paths that share unknown
nodes into groups, and keeps only groups whose path classes are mutually
consistent. The surviving groups become licit or suspicious subgraph
records over unknown nodes only.
"""

from __future__ import annotations

from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, ContractError, DataError
from .graph import BackgroundGraph, TimeWindow, filter_time_window, largest_weak_component


class ClusterLabel(Enum):
    LICIT = "licit"
    ILLICIT = "illicit"


class PathClass(Enum):
    LICIT = "licit"
    ILLICIT = "illicit"
    SUSPICIOUS = "suspicious"
    NEUTRAL = "neutral"


class GroupLabel(Enum):
    LICIT = "licit"
    SUSPICIOUS = "suspicious"
    UNLABELED = "unlabeled"


@dataclass(frozen=True)
class LabeledPath:
    """Simple directed node walk starting at a labeled cluster.

    unknown_nodes holds every unlabeled node on the walk: the interior
    plus the terminal when the walk stopped on an unknown cluster.
    """

    nodes: tuple[int, ...]
    path_class: PathClass
    unknown_nodes: frozenset[int]

    def __post_init__(self) -> None:
        if len(self.nodes) < 2:
            raise ContractError("a path needs at least two nodes")


@dataclass(frozen=True)
class BuilderConfig:
    max_hops: int = 6
    seed_tx_cap: int = 100
    activity_threshold: int = 1000

    def __post_init__(self) -> None:
        if self.max_hops < 1:
            raise ConfigError("max_hops must be >= 1")
        if self.seed_tx_cap < 1:
            raise ConfigError("seed_tx_cap must be >= 1")
        if self.activity_threshold < 0:
            raise ConfigError("activity_threshold must be >= 0")


@dataclass(frozen=True)
class SubgraphRecord:
    id: int
    nodes: tuple[int, ...]
    label: GroupLabel | None = None

    @property
    def size(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class PathGroup:
    paths: tuple[LabeledPath, ...]
    nodes: frozenset[int]

    @property
    def classes(self) -> tuple[PathClass, ...]:
        return tuple(p.path_class for p in self.paths)


@dataclass
class BuildResult:
    graph: BackgroundGraph
    records: list[SubgraphRecord]
    report: dict
    unlabeled_groups: list[PathGroup] = field(default_factory=list)


def seed_transactions(
    g: BackgroundGraph, labels: dict[int, ClusterLabel], cfg: BuilderConfig
) -> list[tuple[int, int]]:
    """Up to cfg.seed_tx_cap outgoing edges per labeled node.

    Seeds are (source node, edge id) pairs, ordered per node by earliest
    timestamp and then smallest destination id so runs are reproducible.
    """
    ts = g.timestamps() if g.timestamp_col is not None else None
    seeds: list[tuple[int, int]] = []
    for v in sorted(labels):
        eids = g.out_edge_ids(v)
        if len(eids) == 0:
            continue
        dsts = g.edge_dst[eids]
        if ts is None:
            order = np.argsort(dsts, kind="stable")
        else:
            order = np.lexsort((dsts, ts[eids]))
        for eid in eids[order][: cfg.seed_tx_cap]:
            seeds.append((v, int(eid)))
    return seeds


def classify_path(labels: dict[int, ClusterLabel], nodes) -> PathClass:
    """Class from the endpoint labels.

    illicit -> licit is suspicious, licit -> licit is licit, illicit ->
    illicit is illicit; everything else (unknown terminal, or the
    licit -> illicit case the taxonomy leaves open) is neutral.
    """
    start = labels.get(nodes[0])
    if start is None:
        raise ContractError(f"path start {nodes[0]} carries no cluster label")
    end = labels.get(nodes[-1])
    if end is None:
        return PathClass.NEUTRAL
    if start is ClusterLabel.ILLICIT and end is ClusterLabel.LICIT:
        return PathClass.SUSPICIOUS
    if start is ClusterLabel.ILLICIT and end is ClusterLabel.ILLICIT:
        return PathClass.ILLICIT
    if start is ClusterLabel.LICIT and end is ClusterLabel.LICIT:
        return PathClass.LICIT
    return PathClass.NEUTRAL


def _make_path(labels: dict[int, ClusterLabel], nodes: list[int]) -> LabeledPath:
    return LabeledPath(
        nodes=tuple(nodes),
        path_class=classify_path(labels, nodes),
        unknown_nodes=frozenset(v for v in nodes if v not in labels),
    )


def traverse_paths(
    g: BackgroundGraph,
    labels: dict[int, ClusterLabel],
    seed: tuple[int, int],
    cfg: BuilderConfig,
) -> list[LabeledPath]:
    """Depth-first enumeration of simple paths from one seed edge.

    A walk terminates at the first of: a labeled node, the hop budget,
    an unknown node whose total degree exceeds the activity threshold,
    or a dead end (no unvisited out-neighbor). Every terminated walk is
    emitted; classification is delegated to classify_path.
    """
    start, eid = seed
    first = int(g.edge_dst[eid])
    if first == start:
        return []  # self-loop seed cannot start a simple path
    out: list[LabeledPath] = []
    path = [start]
    visited = {start}

    def step(node: int) -> None:
        path.append(node)
        if node in labels:
            out.append(_make_path(labels, path))
        elif (
            len(path) - 1 >= cfg.max_hops
            or g.degree(node, "total") > cfg.activity_threshold
        ):
            out.append(_make_path(labels, path))
        else:
            visited.add(node)
            extended = False
            prev = -1
            for w in g.out_neighbors(node).tolist():
                if w == prev or w in visited:
                    continue  # skip parallel edges and cycles
                prev = w
                extended = True
                step(w)
            visited.discard(node)
            if not extended:
                out.append(_make_path(labels, path))
        path.pop()

    step(first)
    return out


def group_paths(paths: list[LabeledPath]) -> list[PathGroup]:
    """Merge paths into groups that share unknown nodes, transitively."""
    n = len(paths)
    parent = list(range(n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    owner: dict[int, int] = {}
    for i, p in enumerate(paths):
        for v in p.unknown_nodes:
            j = owner.setdefault(v, i)
            if j != i:
                union(i, j)

    members: dict[int, list[int]] = {}
    for i in range(n):
        members.setdefault(find(i), []).append(i)

    groups = []
    for idx in members.values():
        grp_paths = tuple(paths[i] for i in idx)
        nodes = frozenset().union(*(p.unknown_nodes for p in grp_paths))
        groups.append(PathGroup(paths=grp_paths, nodes=nodes))
    groups.sort(key=lambda grp: (min(grp.nodes) if grp.nodes else -1, grp.paths[0].nodes))
    return groups


def label_group(group: PathGroup) -> GroupLabel:
    """Consistency rule over the group's path classes."""
    classes = set(group.classes)
    if classes <= {PathClass.LICIT, PathClass.NEUTRAL} and PathClass.LICIT in classes:
        return GroupLabel.LICIT
    if (
        classes <= {PathClass.SUSPICIOUS, PathClass.ILLICIT, PathClass.NEUTRAL}
        and PathClass.SUSPICIOUS in classes
    ):
        return GroupLabel.SUSPICIOUS
    return GroupLabel.UNLABELED


def annotate(
    groups: list[PathGroup],
) -> tuple[list[SubgraphRecord], list[PathGroup], int]:
    """Turn consistent groups into subgraph records.

    Licit records keep unknown nodes of the group's licit paths;
    suspicious records keep unknown nodes of suspicious and illicit
    paths. Nodes seen only on neutral paths drop out. Returns the
    records, the unlabeled groups (diagnostics), and the number of
    labeled groups whose node set came up empty.
    """
    keep = {
        GroupLabel.LICIT: {PathClass.LICIT},
        GroupLabel.SUSPICIOUS: {PathClass.SUSPICIOUS, PathClass.ILLICIT},
    }
    pending: list[tuple[tuple[int, ...], GroupLabel]] = []
    unlabeled: list[PathGroup] = []
    empty = 0
    for grp in groups:
        lab = label_group(grp)
        if lab is GroupLabel.UNLABELED:
            unlabeled.append(grp)
            continue
        nodes: set[int] = set()
        for p in grp.paths:
            if p.path_class in keep[lab]:
                nodes |= p.unknown_nodes
        if not nodes:
            empty += 1
            continue
        pending.append((tuple(sorted(nodes)), lab))

    pending.sort()
    records = [
        SubgraphRecord(id=i, nodes=nodes, label=lab)
        for i, (nodes, lab) in enumerate(pending)
    ]
    return records, unlabeled, empty


def _size_histogram(records: list[SubgraphRecord]) -> dict[str, dict[str, int]]:
    hist: dict[str, Counter] = {"licit": Counter(), "suspicious": Counter()}
    for r in records:
        hist[r.label.value][str(r.size)] += 1
    return {k: dict(sorted(v.items(), key=lambda kv: int(kv[0]))) for k, v in hist.items()}


def build_dataset(
    g: BackgroundGraph,
    labels_external: dict[int, ClusterLabel],
    window: TimeWindow | None,
    cfg: BuilderConfig,
    threads: int = 1,
) -> BuildResult:
    """Run the full construction pipeline and report what happened.

    labels_external is keyed by external node id. Traversal can fan out
    over a thread pool; results are merged in seed order, so the output
    is identical for any thread count.
    """
    if not labels_external:
        raise DataError("cluster label map is empty")
    g.to_internal(np.fromiter(labels_external, dtype=np.int64))  # existence check

    working = filter_time_window(g, window) if window is not None else g
    working = largest_weak_component(working)

    labels: dict[int, ClusterLabel] = {}
    if working.node_count:
        present = set(working.external_ids.tolist())
        ext_of = {e: i for i, e in enumerate(working.external_ids.tolist())}
        for ext, lab in labels_external.items():
            if ext in present:
                labels[ext_of[ext]] = lab

    empty_report = {
        "graph": working.stats(),
        "labels": _label_counts(labels),
        "seeds": 0,
        "paths": {c.value: 0 for c in PathClass} | {"total": 0, "licit_to_illicit": 0},
        "groups": {lab.value: 0 for lab in GroupLabel} | {"empty": 0},
        "records": {"licit": 0, "suspicious": 0},
        "size_histogram": {"licit": {}, "suspicious": {}},
    }
    if not labels:
        return BuildResult(graph=working, records=[], report=empty_report)

    seeds = seed_transactions(working, labels, cfg)
    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_seed = list(pool.map(lambda s: traverse_paths(working, labels, s, cfg), seeds))
    else:
        per_seed = [traverse_paths(working, labels, s, cfg) for s in seeds]

    # parallel seed edges replay the same node walk; keep one copy
    by_nodes: dict[tuple[int, ...], LabeledPath] = {}
    for paths in per_seed:
        for p in paths:
            by_nodes.setdefault(p.nodes, p)
    all_paths = [by_nodes[k] for k in sorted(by_nodes)]

    groups = group_paths(all_paths)
    records, unlabeled, empty = annotate(groups)

    path_counts = Counter(p.path_class.value for p in all_paths)
    lic_to_ill = sum(
        1
        for p in all_paths
        if labels.get(p.nodes[0]) is ClusterLabel.LICIT
        and labels.get(p.nodes[-1]) is ClusterLabel.ILLICIT
    )
    group_counts = Counter(label_group(grp).value for grp in groups)
    record_counts = Counter(r.label.value for r in records)
    report = {
        "graph": working.stats(),
        "labels": _label_counts(labels),
        "seeds": len(seeds),
        "paths": {c.value: path_counts.get(c.value, 0) for c in PathClass}
        | {"total": len(all_paths), "licit_to_illicit": lic_to_ill},
        "groups": {lab.value: group_counts.get(lab.value, 0) for lab in GroupLabel}
        | {"empty": empty},
        "records": {
            "licit": record_counts.get("licit", 0),
            "suspicious": record_counts.get("suspicious", 0),
        },
        "size_histogram": _size_histogram(records),
    }
    return BuildResult(graph=working, records=records, report=report, unlabeled_groups=unlabeled)


def _label_counts(labels: dict[int, ClusterLabel]) -> dict[str, int]:
    c = Counter(lab.value for lab in labels.values())
    return {"licit": c.get("licit", 0), "illicit": c.get("illicit", 0)}
