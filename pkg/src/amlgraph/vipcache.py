"""Vertex-inclusion probability analysis and static feature-cache policies.

Subgraph sampling is reduced to node sampling over an augmented graph:
one synthetic node per subgraph record, wired to its member nodes, whose
sampling layer keeps all neighbors. The synthetic nodes act as the
training items. Inclusion probabilities then propagate layer by layer
under an independence approximation across neighbors, and the resulting
per-node scores rank remote nodes for per-partition feature caches.

The augmented graph is never materialized; the base graph plus the
member lists is enough for every update.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DataError
from .graph import BackgroundGraph


@dataclass(frozen=True)
class AugmentedGraph:
    base: BackgroundGraph
    members: list[np.ndarray]  # sorted unique member ids per record

    @property
    def n_records(self) -> int:
        return len(self.members)

    @property
    def n_total(self) -> int:
        return self.base.node_count + len(self.members)

    def synthetic_id(self, record_index: int) -> int:
        return self.base.node_count + record_index

    @property
    def synthetic_edge_count(self) -> int:
        return int(sum(len(m) for m in self.members))


def augment_graph(g: BackgroundGraph, records) -> AugmentedGraph:
    """Attach one synthetic node per record; duplicate members collapse."""
    members = []
    for rec in records:
        nodes = np.unique(np.asarray(rec.nodes, dtype=np.int64))
        if len(nodes) == 0:
            raise DataError(f"record {rec.id} has no nodes")
        if nodes.min() < 0 or nodes.max() >= g.node_count:
            raise DataError(f"record {rec.id} references a node absent from the graph")
        members.append(nodes)
    return AugmentedGraph(base=g, members=members)


@dataclass(frozen=True)
class VipTable:
    """Per-layer inclusion probabilities over the augmented node set.

    Row 0 is the synthetic-node layer (minibatch membership); row 1 is
    the member layer reached with probability 1 from a chosen synthetic
    node; rows 2.. follow the fanout schedule on the base graph.
    """

    probs: np.ndarray  # (layers, n_total)
    n_real: int
    batch_size: int
    fanouts: tuple[int, ...]

    @property
    def n_layers(self) -> int:
        return self.probs.shape[0]

    def aggregate_scores(self) -> np.ndarray:
        """Expected accesses per minibatch for each real node."""
        return self.probs[:, : self.n_real].sum(axis=0)


def _inclusion_prob(deg: int, mult: int, fanout: int) -> float:
    """P(some copy of a neighbor enters a without-replacement sample).

    Exact hypergeometric form; collapses to min(f, deg)/deg when the
    neighbor appears once.
    """
    f = min(fanout, deg)
    miss = 1.0
    for j in range(mult):
        miss *= (deg - f - j) / (deg - j)
    return 1.0 - miss


def vip_analysis(
    aug: AugmentedGraph,
    train_indices,
    batch_size: int,
    fanouts,
    direction: str = "both",
    legacy_layer0: bool = False,
) -> VipTable:
    """Layered inclusion probabilities for a random minibatch of records.

    Layer 0 assigns each training record's synthetic node probability
    B / #train (the marginal of drawing B of them without replacement);
    legacy_layer0 switches to the historical #train / |V'| constant
    instead. The synthetic layer then propagates to member nodes with
    probability 1, and each further layer applies

        p[l+1](v) = 1 - prod_u (1 - p[l](u) * P(u samples v))

    over the neighbors u of v, treating inclusions as independent.
    """
    fans = tuple(int(f) for f in fanouts)
    if any(f < 1 for f in fans) or not fans:
        raise ConfigError("fanouts must be positive integers")
    train = sorted(int(i) for i in train_indices)
    if not train:
        raise ConfigError("training set is empty")
    if any(i < 0 or i >= aug.n_records for i in train):
        raise ConfigError("training index outside the record list")
    if batch_size < 1 or batch_size > len(train):
        raise ConfigError(
            f"batch size {batch_size} must be in 1..{len(train)} (training records)"
        )

    g = aug.base
    n = g.node_count
    n_layers = len(fans) + 2
    probs = np.zeros((n_layers, aug.n_total))

    p0 = len(train) / aug.n_total if legacy_layer0 else batch_size / len(train)
    for i in train:
        probs[0, aug.synthetic_id(i)] = p0

    # synthetic layer: all members of a chosen record are kept
    miss = np.ones(n)
    for i in train:
        miss[aug.members[i]] *= 1.0 - p0
    probs[1, :n] = 1.0 - miss

    degs = g.degrees(direction)
    for layer in range(2, n_layers):
        f = fans[layer - 2]
        prev = probs[layer - 1, :n]
        miss = np.ones(n)
        for u in np.nonzero(prev > 0.0)[0].tolist():
            nbrs = g.neighbors(u, direction)
            d = int(degs[u])
            if d == 0:
                continue
            uniq, counts = np.unique(nbrs, return_counts=True)
            pu = prev[u]
            if counts.max() == 1:
                q = min(f, d) / d
                miss[uniq] *= 1.0 - pu * q
            else:
                for w, m in zip(uniq.tolist(), counts.tolist()):
                    miss[w] *= 1.0 - pu * _inclusion_prob(d, m, f)
        probs[layer, :n] = np.clip(1.0 - miss, 0.0, 1.0)

    np.clip(probs, 0.0, 1.0, out=probs)
    return VipTable(probs=probs, n_real=n, batch_size=batch_size, fanouts=fans)


def partition_nodes(
    g: BackgroundGraph,
    n_parts: int,
    seed: int,
    mode: str = "random",
    records=None,
    balance_factor: float = 1.1,
) -> np.ndarray:
    """Assign every node to one of n_parts feature partitions.

    random: a shuffled even split (sizes differ by at most one).
    subgraph-aware: records are packed whole onto the least-loaded
    partition whenever the balance cap permits, then remaining nodes
    fill up the slack.
    """
    if n_parts < 1:
        raise ConfigError("need at least one partition")
    n = g.node_count
    part = np.full(n, -1, dtype=np.int64)
    if mode == "random":
        perm = np.random.default_rng(seed).permutation(n)
        base, rem = divmod(n, n_parts)
        start = 0
        for p in range(n_parts):
            size = base + (1 if p < rem else 0)
            part[perm[start : start + size]] = p
            start += size
        return part
    if mode != "subgraph-aware":
        raise ConfigError(f"unknown partition mode {mode!r}")
    if balance_factor < 1.0:
        raise ConfigError("balance_factor must be >= 1")
    cap = max(int(np.ceil(n / n_parts * balance_factor)), -(-n // n_parts))
    loads = [0] * n_parts

    def least_loaded() -> int:
        return min(range(n_parts), key=lambda p: (loads[p], p))

    recs = list(records or [])
    recs.sort(key=lambda r: (-len(r.nodes), r.id))
    for rec in recs:
        nodes = [v for v in rec.nodes if part[v] < 0]
        if not nodes:
            continue
        p = least_loaded()
        if loads[p] + len(nodes) <= cap:
            for v in nodes:
                part[v] = p
            loads[p] += len(nodes)
        else:
            for v in nodes:  # balance wins over co-location
                q = least_loaded()
                part[v] = q
                loads[q] += 1
    for v in np.nonzero(part < 0)[0].tolist():
        q = least_loaded()
        part[v] = q
        loads[q] += 1
    return part


@dataclass(frozen=True)
class CachePolicy:
    cached: list[np.ndarray]  # per partition, remote node ids
    budget: int


def build_cache_policy(vip: VipTable, partition: np.ndarray, budget: int) -> CachePolicy:
    """Per partition, cache the top-budget remote nodes by VIP score."""
    if budget < 0:
        raise ConfigError("cache budget must be >= 0")
    scores = vip.aggregate_scores()
    n_parts = int(partition.max()) + 1 if len(partition) else 1
    cached = []
    for p in range(n_parts):
        remote = np.nonzero(partition != p)[0]
        if budget == 0 or len(remote) == 0:
            cached.append(np.empty(0, dtype=np.int64))
            continue
        order = np.lexsort((remote, -scores[remote]))  # score desc, id asc
        cached.append(np.sort(remote[order[:budget]]))
    return CachePolicy(cached=cached, budget=budget)


def random_cache_policy(
    partition: np.ndarray, budget: int, rng: np.random.Generator
) -> CachePolicy:
    """Budget-matched baseline: cache uniformly random remote nodes."""
    if budget < 0:
        raise ConfigError("cache budget must be >= 0")
    n_parts = int(partition.max()) + 1 if len(partition) else 1
    cached = []
    for p in range(n_parts):
        remote = np.nonzero(partition != p)[0]
        k = min(budget, len(remote))
        pick = rng.choice(len(remote), size=k, replace=False) if k else []
        cached.append(np.sort(remote[pick]) if k else np.empty(0, dtype=np.int64))
    return CachePolicy(cached=cached, budget=budget)


def simulate_comm_volume(
    g: BackgroundGraph,
    partition: np.ndarray,
    policy: CachePolicy,
    minibatches,
) -> dict:
    """Count remote feature rows each partition would fetch per minibatch.

    Every partition is played as the requester of each minibatch's full
    sampled node set; rows owned locally cost nothing, cached remote
    rows cost nothing, everything else is a fetch.
    """
    n_parts = int(partition.max()) + 1 if len(partition) else 1
    if len(policy.cached) != n_parts:
        raise ContractError("cache policy does not match the partition count")
    cached_masks = []
    for p, ids in enumerate(policy.cached):
        mask = np.zeros(g.node_count, dtype=bool)
        if len(ids):
            if (partition[ids] == p).any():
                raise ContractError(f"partition {p} caches its own nodes")
            mask[ids] = True
        cached_masks.append(mask)

    without = 0
    with_cache = 0
    per_part = [0] * n_parts
    n_batches = 0
    for mb in minibatches:
        nodes = mb.all_nodes()
        n_batches += 1
        owner = partition[nodes]
        for p in range(n_parts):
            remote = nodes[owner != p]
            without += len(remote)
            misses = int(np.count_nonzero(~cached_masks[p][remote]))
            with_cache += misses
            per_part[p] += misses
    hit_rate = 0.0 if without == 0 else 1.0 - with_cache / without
    return {
        "batches": n_batches,
        "partitions": n_parts,
        "remote_rows_no_cache": int(without),
        "remote_rows_with_cache": int(with_cache),
        "reduction_ratio": hit_rate,
        "per_partition_fetches": per_part,
    }
