"""Synthetic background graph with planted licit/suspicious subgraphs.

The generator plants a boundary-only class signal. Members of every
record form a short directed chain, carry identically distributed
features, and are padded to one fixed total degree, so a model that sees
only the inside of a subgraph has nothing to separate the classes with.
Suspicious records differ solely in their surroundings: the exit member
feeds a two-step peel chain whose hops also pay out into one of a few
heavy sink hubs, mimicking repeated small transfers toward a service,
while licit exit chains pay out into ordinary low-degree nodes. A
background-aware model can pick the hub's degree out of the two-hop
neighborhood; a segregated one cannot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .builder import GroupLabel, SubgraphRecord
from .errors import ConfigError
from .graph import BackgroundGraph, build_graph


@dataclass(frozen=True)
class SynthParams:
    n_nodes: int = 10_000
    n_records: int = 1_000
    suspicious_frac: float = 0.0227
    boundary_strength: float = 1.0  # fraction of suspicious records wired to a hub
    n_hubs: int = 3
    hub_spokes: int = 600  # filler in-edges per hub
    noise_edges: int = 5_000
    member_degree: int = 4
    min_size: int = 2
    max_size: int = 5

    def __post_init__(self) -> None:
        if self.n_records < 1 or self.n_nodes < 1:
            raise ConfigError("need positive node and record counts")
        if not 0.0 <= self.suspicious_frac <= 1.0:
            raise ConfigError("suspicious_frac must be in [0, 1]")
        if not 0.0 <= self.boundary_strength <= 1.0:
            raise ConfigError("boundary_strength must be in [0, 1]")
        if self.min_size < 2 or self.max_size < self.min_size:
            raise ConfigError("record sizes need max_size >= min_size >= 2")
        if self.member_degree < 3:
            raise ConfigError("member_degree must be >= 3 to fit the planted edges")


@dataclass
class SynthResult:
    graph: BackgroundGraph
    records: list[SubgraphRecord]
    params: SynthParams
    seed: int


def generate(params: SynthParams, seed: int) -> SynthResult:
    """Deterministic dataset for the given seed."""
    rng = np.random.default_rng(seed)
    p = params

    sizes = rng.integers(p.min_size, p.max_size + 1, size=p.n_records)
    n_members = int(sizes.sum())
    n_chain = 2 * p.n_records
    n_fillers = p.n_nodes - n_members - n_chain - p.n_hubs
    if n_fillers < 100:
        raise ConfigError(
            f"{p.n_nodes} nodes cannot host {p.n_records} records "
            f"(needs {n_members + n_chain + p.n_hubs + 100})"
        )

    # id layout: members | chain nodes | hubs | fillers
    member_base = 0
    chain_base = n_members
    hub_base = chain_base + n_chain
    filler_base = hub_base + p.n_hubs
    fillers = np.arange(filler_base, p.n_nodes, dtype=np.int64)

    n_sus = int(round(p.n_records * p.suspicious_frac))
    sus_set = set(rng.choice(p.n_records, size=n_sus, replace=False).tolist()) if n_sus else set()
    n_wired = int(np.ceil(p.boundary_strength * n_sus))
    wired = set(sorted(sus_set)[:n_wired])

    src: list[int] = []
    dst: list[int] = []

    def filler_pick(k: int = 1) -> np.ndarray:
        return fillers[rng.integers(0, len(fillers), size=k)]

    records: list[SubgraphRecord] = []
    offset = member_base
    for r in range(p.n_records):
        k = int(sizes[r])
        nodes = list(range(offset, offset + k))
        offset += k
        c1 = chain_base + 2 * r
        c2 = c1 + 1
        # internal flow: a simple member chain
        for a, b in zip(nodes[:-1], nodes[1:]):
            src.append(a)
            dst.append(b)
        # every non-exit member pays one context node; the exit member
        # starts the peel chain
        for m in nodes[:-1]:
            src.append(m)
            dst.append(int(filler_pick()[0]))
        exit_member = nodes[-1]
        src += [exit_member, c1]
        dst += [c1, c2]
        hub = hub_base + int(rng.integers(0, p.n_hubs))
        if r in wired:
            peel1, peel2 = hub, hub
        else:
            peel1, peel2 = (int(v) for v in filler_pick(2))
        src += [c1, c2]
        dst += [peel1, peel2]
        # pad every member to the same total degree; the exit of a wired
        # record pays its first pad slot straight into the hub, like the
        # small repeated transfers of a peeling chain
        for m in nodes:
            have = 2 if (m == nodes[0] or m == exit_member) else 3
            pads = [int(t) for t in filler_pick(p.member_degree - have)]
            if m == exit_member and r in wired and pads:
                pads[0] = hub
            for tgt in pads:
                src.append(m)
                dst.append(tgt)
        label = GroupLabel.SUSPICIOUS if r in sus_set else GroupLabel.LICIT
        records.append(SubgraphRecord(id=r, nodes=tuple(nodes), label=label))

    # fatten the hubs so their degree stands far out of the filler range
    for h in range(p.n_hubs):
        for tgt in filler_pick(p.hub_spokes):
            src.append(int(tgt))
            dst.append(hub_base + h)

    # background noise among fillers only, so member degrees stay fixed
    for _ in range(p.noise_edges):
        a, b = filler_pick(2)
        if a != b:
            src.append(int(a))
            dst.append(int(b))

    n_edges = len(src)
    node_ids = np.arange(p.n_nodes, dtype=np.int64)
    node_features = rng.integers(0, 10, size=(p.n_nodes, 2))
    edge_features = np.empty((n_edges, 2), dtype=np.int64)
    edge_features[:, 0] = rng.integers(0, 1_000_000, size=n_edges)  # timestamp bins
    edge_features[:, 1] = rng.integers(0, 8, size=n_edges)
    graph = build_graph(
        node_ids,
        node_features,
        np.asarray(src, dtype=np.int64),
        np.asarray(dst, dtype=np.int64),
        edge_features,
        timestamp_col=0,
    )
    return SynthResult(graph=graph, records=records, params=p, seed=seed)
