"""Dataset construction: traversal, classification, grouping, annotation."""

from collections import Counter, defaultdict

import numpy as np
import pytest

from amlgraph.builder import (
    BuilderConfig,
    ClusterLabel,
    GroupLabel,
    LabeledPath,
    PathClass,
    annotate,
    build_dataset,
    classify_path,
    group_paths,
    label_group,
    seed_transactions,
    traverse_paths,
)
from amlgraph.errors import ConfigError, ContractError, DataError

from conftest import make_graph

I, L = ClusterLabel.ILLICIT, ClusterLabel.LICIT


def _cfg(**kw):
    base = dict(max_hops=6, seed_tx_cap=100, activity_threshold=1000)
    base.update(kw)
    return BuilderConfig(**base)


# -- classification ------------------------------------------------------


def test_classify_endpoint_taxonomy():
    labels = {1: I, 12: L, 13: L, 19: L}
    assert classify_path(labels, [1, 7, 8, 9, 12]) is PathClass.SUSPICIOUS
    assert classify_path(labels, [13, 14, 15, 19]) is PathClass.LICIT
    assert classify_path(labels, [1, 2, 3]) is PathClass.NEUTRAL
    assert classify_path({1: I, 6: I}, [1, 7, 4, 5, 6]) is PathClass.ILLICIT


def test_classify_licit_to_illicit_defaults_neutral():
    assert classify_path({0: L, 9: I}, [0, 5, 9]) is PathClass.NEUTRAL


def test_classify_requires_labeled_start():
    with pytest.raises(ContractError):
        classify_path({9: L}, [0, 9])


# -- seeds ---------------------------------------------------------------


def test_seed_transactions_under_cap():
    g = make_graph([(0, 1), (0, 2)])
    seeds = seed_transactions(g, {0: I}, _cfg(seed_tx_cap=10))
    assert len(seeds) == 2
    assert all(s == 0 for s, _ in seeds)


def test_seed_transactions_cap_orders_by_time_then_dst():
    rng = np.random.default_rng(0)
    dsts = rng.permutation(np.arange(1, 101))
    ts = rng.integers(0, 50, size=100)
    edges = [(0, int(d)) for d in dsts]
    g = make_graph(edges, timestamps=ts)
    seeds = seed_transactions(g, {0: I}, _cfg(seed_tx_cap=5))
    assert len(seeds) == 5
    chosen = [(int(g.timestamps()[e]), int(g.edge_dst[e])) for _, e in seeds]
    # oracle: sort every outgoing edge by (timestamp, dst), take five
    oracle = sorted(
        (int(g.timestamps()[e]), int(g.edge_dst[e])) for e in g.out_edge_ids(0)
    )[:5]
    assert chosen == oracle


def test_seed_transactions_no_labels():
    g = make_graph([(0, 1)])
    assert seed_transactions(g, {}, _cfg()) == []


# -- traversal -----------------------------------------------------------


def _traverse_all(g, labels, cfg):
    paths = []
    for seed in seed_transactions(g, labels, cfg):
        paths.extend(traverse_paths(g, labels, seed, cfg))
    return paths


def test_traverse_single_chain():
    g = make_graph([(0, 1), (1, 2)])
    labels = {0: I, 2: L}
    paths = _traverse_all(g, labels, _cfg())
    assert len(paths) == 1
    assert paths[0].nodes == (0, 1, 2)
    assert paths[0].path_class is PathClass.SUSPICIOUS


def test_traverse_hop_budget_truncates():
    # 0 -> u1 .. u7 -> licit 8 with budget 6: ends at the sixth unknown
    edges = [(i, i + 1) for i in range(8)]
    g = make_graph(edges)
    labels = {0: I, 8: L}
    paths = _traverse_all(g, labels, _cfg(max_hops=6))
    assert len(paths) == 1
    assert paths[0].nodes == (0, 1, 2, 3, 4, 5, 6)
    assert paths[0].path_class is PathClass.NEUTRAL


def test_traverse_early_stop_on_active_node():
    edges = [(0, 1)] + [(1, k) for k in range(2, 9)] + [(k, 1) for k in range(9, 12)]
    g = make_graph(edges)
    labels = {0: I}
    assert g.degree(1, "total") == 11
    paths = _traverse_all(g, labels, _cfg(activity_threshold=10))
    assert [p.nodes for p in paths] == [(0, 1)]
    assert paths[0].path_class is PathClass.NEUTRAL


def test_traverse_stops_at_first_labeled_node():
    g = make_graph([(0, 1), (1, 2), (2, 3)])
    labels = {0: I, 2: L, 3: I}
    seed = next(s for s in seed_transactions(g, labels, _cfg()) if s[0] == 0)
    paths = traverse_paths(g, labels, seed, _cfg())
    assert [p.nodes for p in paths] == [(0, 1, 2)]  # no continuation past node 2


def test_traverse_avoids_cycles():
    g = make_graph([(0, 1), (1, 2), (2, 1)])
    labels = {0: I}
    paths = _traverse_all(g, labels, _cfg())
    assert [p.nodes for p in paths] == [(0, 1, 2)]


def test_path_needs_two_nodes():
    with pytest.raises(ContractError):
        LabeledPath(nodes=(1,), path_class=PathClass.NEUTRAL, unknown_nodes=frozenset())


# -- grouping and labeling -------------------------------------------------


def _path(nodes, cls, unknown):
    return LabeledPath(nodes=tuple(nodes), path_class=cls, unknown_nodes=frozenset(unknown))


def test_group_paths_shared_interior():
    p1 = _path([13, 14, 15, 19], PathClass.LICIT, {14, 15})
    p2 = _path([16, 17, 15, 19], PathClass.LICIT, {17, 15})
    groups = group_paths([p1, p2])
    assert len(groups) == 1
    assert groups[0].nodes == {14, 15, 17}


def test_group_paths_disjoint():
    p1 = _path([1, 2, 3], PathClass.NEUTRAL, {2})
    p2 = _path([20, 21, 22, 24], PathClass.SUSPICIOUS, {21, 22})
    groups = group_paths([p1, p2])
    assert len(groups) == 2


def test_group_paths_transitive_merge():
    p1 = _path([1, 7, 8, 9, 12], PathClass.SUSPICIOUS, {7, 8, 9})
    p2 = _path([1, 7, 8, 10, 11, 12], PathClass.SUSPICIOUS, {7, 8, 10, 11})
    p3 = _path([1, 7, 4, 5, 6], PathClass.ILLICIT, {7, 4, 5})
    groups = group_paths([p1, p2, p3])
    assert len(groups) == 1
    assert groups[0].nodes == {4, 5, 7, 8, 9, 10, 11}


def test_label_group_rules():
    S, IL, N, LI = PathClass.SUSPICIOUS, PathClass.ILLICIT, PathClass.NEUTRAL, PathClass.LICIT
    mk = lambda *classes: group_paths(
        [_path([90 + i, 100 + i], c, {100 + i}) for i, c in enumerate(classes)]
    )
    merged = group_paths(
        [
            _path([0, 1, 2], S, {1}),
            _path([3, 1, 4], IL, {1}),
            _path([5, 1, 6], S, {1}),
        ]
    )
    assert label_group(merged[0]) is GroupLabel.SUSPICIOUS
    mixed = group_paths([_path([0, 1, 2], S, {1}), _path([3, 1, 4], LI, {1})])
    assert label_group(mixed[0]) is GroupLabel.UNLABELED
    licit = group_paths([_path([0, 1, 2], LI, {1}), _path([3, 1, 4], LI, {1})])
    assert label_group(licit[0]) is GroupLabel.LICIT
    for grp in mk(N):
        assert label_group(grp) is GroupLabel.UNLABELED
    for grp in mk(IL):
        assert label_group(grp) is GroupLabel.UNLABELED


def test_annotate_drops_neutral_only_nodes():
    licit = _path([0, 1, 2], PathClass.LICIT, {1})
    neutral = _path([0, 1, 3, 4], PathClass.NEUTRAL, {1, 3, 4})
    records, unlabeled, empty = annotate(group_paths([licit, neutral]))
    assert len(records) == 1
    assert records[0].nodes == (1,)
    assert records[0].label is GroupLabel.LICIT
    assert not unlabeled and empty == 0


def test_annotate_smallest_case():
    licit = _path([0, 1, 2], PathClass.LICIT, {1})
    records, _, _ = annotate(group_paths([licit]))
    assert [r.nodes for r in records] == [(1,)]


def test_annotate_pure_neutral_emits_nothing():
    neutral = _path([0, 1, 2], PathClass.NEUTRAL, {1, 2})
    records, unlabeled, _ = annotate(group_paths([neutral]))
    assert records == []
    assert len(unlabeled) == 1


def test_annotate_counts_empty_node_sets():
    direct = _path([0, 1], PathClass.LICIT, set())  # licit -> licit, no interior
    records, unlabeled, empty = annotate(group_paths([direct]))
    assert records == [] and empty == 1 and not unlabeled


# -- full pipeline ---------------------------------------------------------


def test_build_dataset_walkthrough(walkthrough_graph, walkthrough_labels):
    res = build_dataset(walkthrough_graph, walkthrough_labels, None, _cfg())
    assert res.report["paths"] == {
        "licit": 3,
        "illicit": 1,
        "suspicious": 3,
        "neutral": 1,
        "total": 8,
        "licit_to_illicit": 0,
    }
    recs = {
        r.label.value: sorted(res.graph.to_external(np.array(r.nodes)).tolist())
        for r in res.records
    }
    assert recs == {
        "licit": [14, 15, 17],
        "suspicious": [4, 5, 7, 8, 9, 10, 11],
    }
    unl = sorted(
        sorted(res.graph.to_external(np.array(sorted(grp.nodes))).tolist())
        for grp in res.unlabeled_groups
    )
    assert [21, 22] in unl
    assert all(2 not in nodes for nodes in recs.values())


def test_build_dataset_empty_window(walkthrough_graph, walkthrough_labels):
    from amlgraph.graph import TimeWindow

    res = build_dataset(walkthrough_graph, walkthrough_labels, TimeWindow(900, 901), _cfg())
    assert res.records == []
    assert res.report["paths"]["total"] == 0


def test_build_dataset_empty_labels(walkthrough_graph):
    with pytest.raises(DataError):
        build_dataset(walkthrough_graph, {}, None, _cfg())


def test_build_dataset_unknown_label_node(walkthrough_graph):
    with pytest.raises(DataError):
        build_dataset(walkthrough_graph, {999: I}, None, _cfg())


def test_build_dataset_thread_count_invariant(walkthrough_graph, walkthrough_labels):
    a = build_dataset(walkthrough_graph, walkthrough_labels, None, _cfg(), threads=1)
    b = build_dataset(walkthrough_graph, walkthrough_labels, None, _cfg(), threads=4)
    assert [(r.label, r.nodes) for r in a.records] == [(r.label, r.nodes) for r in b.records]
    assert a.report == b.report


def test_config_validation():
    with pytest.raises(ConfigError):
        BuilderConfig(max_hops=0)
    with pytest.raises(ConfigError):
        BuilderConfig(seed_tx_cap=0)


def test_record_invariants_on_walkthrough(walkthrough_graph, walkthrough_labels):
    res = build_dataset(walkthrough_graph, walkthrough_labels, None, _cfg())
    label_nodes = {
        int(i)
        for i in res.graph.to_internal(
            np.array([k for k in walkthrough_labels], dtype=np.int64)
        )
    }
    seen = set()
    for rec in res.records:
        assert not (set(rec.nodes) & label_nodes)  # only unknown nodes
        assert not (set(rec.nodes) & seen)  # records are node-disjoint
        seen |= set(rec.nodes)


# -- brute-force oracle -----------------------------------------------------


def oracle_build(n_nodes, edges, labels, max_hops, threshold):
    """Independent execution of the whole construction.

    Plain dict/set implementation: BFS connected components, recursive
    enumeration of all qualifying simple walks, repeated set merging for
    grouping, and direct set algebra for annotation. Node ids are the
    external ids throughout. Returns (path class counts, record set).
    """
    # undirected components via BFS
    nbrs = defaultdict(set)
    for a, b in edges:
        nbrs[a].add(b)
        nbrs[b].add(a)
    unvisited = set(range(n_nodes))
    comps = []
    while unvisited:
        root = min(unvisited)
        stack, comp = [root], set()
        unvisited.discard(root)
        while stack:
            v = stack.pop()
            comp.add(v)
            for w in nbrs[v]:
                if w in unvisited:
                    unvisited.discard(w)
                    stack.append(w)
        comps.append(comp)
    keep = max(comps, key=lambda c: (len(c), -min(c)))

    out_adj = defaultdict(list)
    deg = Counter()
    for a, b in edges:
        if a in keep:
            out_adj[a].append(b)
            deg[a] += 1
            deg[b] += 1
    lab = {v: labels[v] for v in labels if v in keep}

    walks = set()

    def extend(path):
        u = path[-1]
        succs = sorted(set(out_adj[u]) - set(path))
        grew = False
        for w in succs:
            grew = True
            if w in lab or len(path) >= max_hops or deg[w] > threshold:
                walks.add(tuple(path + [w]))
            else:
                extend(path + [w])
        if not grew:
            walks.add(tuple(path))

    for s in sorted(lab):
        for w in sorted(set(out_adj[s])):
            if w == s:
                continue
            if w in lab or max_hops == 1 or deg[w] > threshold:
                walks.add((s, w))
            else:
                extend([s, w])

    def cls(path):
        a, b = lab.get(path[0]), lab.get(path[-1])
        if b is None:
            return "neutral"
        if a is I and b is L:
            return "suspicious"
        if a is I and b is I:
            return "illicit"
        if a is L and b is L:
            return "licit"
        return "neutral"

    classed = [(p, cls(p), frozenset(v for v in p if v not in lab)) for p in walks]
    counts = Counter(c for _, c, _ in classed)

    # grouping: merge path entries until no two share a node
    groups = [[{c}, set(unk), [(c, unk)]] for _, c, unk in classed]
    changed = True
    while changed:
        changed = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if groups[i][1] & groups[j][1]:
                    groups[i][0] |= groups[j][0]
                    groups[i][1] |= groups[j][1]
                    groups[i][2].extend(groups[j][2])
                    del groups[j]
                    changed = True
                    break
            if changed:
                break

    records = set()
    for classes, _, paths in groups:
        if classes <= {"licit", "neutral"} and "licit" in classes:
            nodes = frozenset().union(*(u for c, u in paths if c == "licit"))
            if nodes:
                records.add(("licit", nodes))
        elif classes <= {"suspicious", "illicit", "neutral"} and "suspicious" in classes:
            nodes = frozenset().union(
                *(u for c, u in paths if c in ("suspicious", "illicit"))
            )
            if nodes:
                records.add(("suspicious", nodes))
    return counts, records


def random_instance(rng):
    n = int(rng.integers(8, 120))
    m = int(rng.integers(n // 2, 2 * n))
    edges = [
        (int(rng.integers(0, n)), int(rng.integers(0, n))) for _ in range(m)
    ]
    labels = {}
    for v in rng.choice(n, size=max(2, n // 8), replace=False):
        labels[int(v)] = I if rng.random() < 0.5 else L
    max_hops = int(rng.integers(1, 5))
    threshold = int(rng.integers(3, 50)) if rng.random() < 0.5 else 10**9
    return n, edges, labels, max_hops, threshold


def run_equivalence(seed):
    rng = np.random.default_rng(seed)
    n, edges, labels, max_hops, threshold = random_instance(rng)
    ts = rng.integers(0, 100, size=len(edges))
    g = make_graph(edges, n_nodes=n, timestamps=ts)
    cfg = BuilderConfig(max_hops=max_hops, seed_tx_cap=10**9, activity_threshold=threshold)
    res = build_dataset(g, labels, None, cfg)

    got_counts = {
        k: v for k, v in res.report["paths"].items() if k not in ("total", "licit_to_illicit")
    }
    got_records = {
        (
            r.label.value,
            frozenset(res.graph.to_external(np.array(r.nodes)).tolist()),
        )
        for r in res.records
    }
    want_counts, want_records = oracle_build(n, edges, labels, max_hops, threshold)
    assert got_counts == {c: want_counts.get(c, 0) for c in got_counts}, (seed, "counts")
    assert got_records == want_records, (seed, "records")


@pytest.mark.parametrize("seed", range(12))
def test_build_matches_bruteforce_oracle(seed):
    run_equivalence(seed)
