"""Dataset splitting, minibatch composition, and nodewise neighborhood sampling.

A minibatch of subgraphs is a flat node list whose prefix is the
concatenation of the member node sets, with (start, end) range metadata
per subgraph, followed by the extra nodes pulled in by per-layer
neighborhood sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, DataError
from .graph import BackgroundGraph


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.8
    val: float = 0.1
    test: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        for r in (self.train, self.val, self.test):
            if r <= 0:
                raise ConfigError("split ratios must be positive")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise ConfigError("split ratios must sum to 1")


@dataclass(frozen=True)
class Splits:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


@dataclass
class Minibatch:
    node_list: np.ndarray
    subgraph_ranges: list[tuple[int, int]]
    layer_edges: list[np.ndarray]  # per sampling hop, rows of (frontier node, sampled neighbor)
    labels: np.ndarray | None = None
    record_ids: list[int] = field(default_factory=list)

    @property
    def prefix_len(self) -> int:
        return self.subgraph_ranges[-1][1] if self.subgraph_ranges else 0

    def subgraph_nodes(self, k: int) -> np.ndarray:
        s, e = self.subgraph_ranges[k]
        return self.node_list[s:e]

    def all_nodes(self) -> np.ndarray:
        parts = [self.node_list]
        for edges in self.layer_edges:
            if len(edges):
                parts.append(edges.reshape(-1))
        return np.unique(np.concatenate(parts))


def split_dataset(records, spec: SplitSpec) -> Splits:
    """Disjoint train/val/test cover; floor-rounded, remainder to train."""
    n = records if isinstance(records, int) else len(records)
    if n == 0:
        raise ConfigError("cannot split an empty record set")
    n_val = int(n * spec.val + 1e-9)
    n_test = int(n * spec.test + 1e-9)
    n_train = n - n_val - n_test
    perm = np.random.default_rng(spec.seed).permutation(n)
    return Splits(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train : n_train + n_val]),
        test=np.sort(perm[n_train + n_val :]),
    )


def make_minibatches(indices, batch_size: int, rng) -> list[np.ndarray]:
    """Shuffle indices and split into batches; the last may be short."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    idx = np.asarray(indices, dtype=np.int64)
    shuffled = idx[rng.permutation(len(idx))]
    return [shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)]


def batch_rng(seed: int, epoch: int, index: int) -> np.random.Generator:
    """Generator derived from (global seed, epoch, batch index).

    Keeps runs reproducible for any worker pool size or completion order.
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(epoch, index)))


def check_fanouts(fanouts) -> tuple[int, ...]:
    fans = tuple(int(f) for f in fanouts)
    if len(fans) < 1 or any(f < 1 for f in fans):
        raise ConfigError(f"fanouts must be positive integers, got {fanouts!r}")
    return fans


def nodewise_sample(
    g: BackgroundGraph,
    seeds,
    fanouts,
    rng: np.random.Generator,
    direction: str = "both",
) -> tuple[list[np.ndarray], np.ndarray]:
    """Sample up to f_l neighbors per frontier node, layer by layer.

    Sampling is uniform without replacement over the neighbor multiset
    (parallel edges count), so each frontier node contributes exactly
    min(f_l, deg) sampled edges. The frontier is cumulative: seeds stay
    in every layer's frontier. Returns the per-layer edge arrays and the
    union frontier.
    """
    fans = check_fanouts(fanouts)
    seeds = np.unique(np.asarray(seeds, dtype=np.int64))
    if len(seeds) == 0:
        raise ContractError("nodewise_sample needs at least one seed")
    if seeds.min() < 0 or seeds.max() >= g.node_count:
        raise DataError("sampling seed outside the graph")

    frontier = seeds
    layers: list[np.ndarray] = []
    for f in fans:
        srcs: list[np.ndarray] = []
        dsts: list[np.ndarray] = []
        for u in frontier.tolist():
            nbrs = g.neighbors(u, direction)
            d = len(nbrs)
            if d == 0:
                continue
            if d <= f:
                chosen = nbrs
            else:
                chosen = nbrs[rng.choice(d, size=f, replace=False)]
            srcs.append(np.full(len(chosen), u, dtype=np.int64))
            dsts.append(np.asarray(chosen, dtype=np.int64))
        if srcs:
            edges = np.stack(
                (np.concatenate(srcs), np.concatenate(dsts)), axis=1
            )
        else:
            edges = np.empty((0, 2), dtype=np.int64)
        layers.append(edges)
        if len(edges):
            frontier = np.union1d(frontier, edges[:, 1])
    return layers, frontier


def build_subgraph_minibatch(
    g: BackgroundGraph,
    records,
    fanouts,
    rng: np.random.Generator,
    direction: str = "both",
    labels=None,
) -> Minibatch:
    """Compose a minibatch from subgraph records and sample its neighborhood.

    The node list starts with each record's nodes in range order; layer
    sampling is seeded from the union of member nodes, so every member
    is in every layer's frontier.
    """
    if not len(records):
        raise ContractError("minibatch needs at least one record")
    ranges: list[tuple[int, int]] = []
    prefix_parts: list[np.ndarray] = []
    pos = 0
    for rec in records:
        nodes = np.asarray(rec.nodes, dtype=np.int64)
        prefix_parts.append(nodes)
        ranges.append((pos, pos + len(nodes)))
        pos += len(nodes)
    prefix = np.concatenate(prefix_parts)
    if len(prefix) == 0:
        raise DataError("records contain no nodes")
    if prefix.min() < 0 or prefix.max() >= g.node_count:
        raise DataError("record references a node absent from the graph")

    seeds = np.unique(prefix)
    if fanouts is None:
        layers: list[np.ndarray] = []
        frontier = seeds
    else:
        layers, frontier = nodewise_sample(g, seeds, fanouts, rng, direction)
    extra = np.setdiff1d(frontier, seeds)
    node_list = np.concatenate((prefix, extra))
    lab = None if labels is None else np.asarray(labels, dtype=np.int64)
    return Minibatch(
        node_list=node_list,
        subgraph_ranges=ranges,
        layer_edges=layers,
        labels=lab,
        record_ids=[int(rec.id) for rec in records],
    )
