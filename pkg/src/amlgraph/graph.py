"""Immutable directed multigraph of transaction clusters.

Storage is array based: a canonical edge list sorted by (src, dst) plus CSR
index arrays for out- and in-adjacency. Nodes get dense internal ids
0..N-1 assigned by ascending external id; the external<->internal mapping
is kept so results can be written back in the input id space. Parallel
edges and self-loops are allowed. All arrays are frozen after
construction, so concurrent readers need no locking.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

CACHE_MAGIC = b"SGF1"


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval [start, end) in timestamp-column units."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.end <= self.start:
            raise ConfigError(
                f"time window end must exceed start, got [{self.start}, {self.end})"
            )


class BackgroundGraph:
    """Directed multigraph with ordinal node/edge features.

    Do not call the constructor directly; use :func:`build_graph` or
    :func:`load_cache`. Edge arrays are in canonical (src, dst) order, so
    the out-adjacency of node v is the contiguous slice
    ``out_indptr[v]:out_indptr[v+1]`` of ``edge_dst`` and edge ids equal
    row positions in that slice.
    """

    def __init__(
        self,
        external_ids: np.ndarray,
        node_features: np.ndarray,
        edge_src: np.ndarray,
        edge_dst: np.ndarray,
        edge_features: np.ndarray,
        timestamp_col: int | None,
    ):
        n = len(external_ids)
        order = np.lexsort((edge_dst, edge_src))
        self.external_ids = np.ascontiguousarray(external_ids, dtype=np.int64)
        self.node_features = np.ascontiguousarray(node_features, dtype=np.int64)
        self.edge_src = np.ascontiguousarray(edge_src[order], dtype=np.int64)
        self.edge_dst = np.ascontiguousarray(edge_dst[order], dtype=np.int64)
        self.edge_features = np.ascontiguousarray(edge_features[order], dtype=np.int64)
        self.timestamp_col = timestamp_col

        e = len(self.edge_src)
        out_counts = np.bincount(self.edge_src, minlength=n)
        self.out_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(out_counts, out=self.out_indptr[1:])

        in_order = np.lexsort((self.edge_src, self.edge_dst))
        self.in_src = self.edge_src[in_order]
        self.in_edge_ids = np.ascontiguousarray(in_order, dtype=np.int64)
        in_counts = np.bincount(self.edge_dst, minlength=n)
        self.in_indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(in_counts, out=self.in_indptr[1:])

        self._out_degree = out_counts.astype(np.int64)
        self._in_degree = in_counts.astype(np.int64)
        self._total_degree = self._out_degree + self._in_degree
        assert e == self.out_indptr[-1] == self.in_indptr[-1]

        for arr in (
            self.external_ids,
            self.node_features,
            self.edge_src,
            self.edge_dst,
            self.edge_features,
            self.out_indptr,
            self.in_src,
            self.in_edge_ids,
            self.in_indptr,
            self._out_degree,
            self._in_degree,
            self._total_degree,
        ):
            arr.setflags(write=False)

    # -- basic shape ---------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.external_ids)

    @property
    def edge_count(self) -> int:
        return len(self.edge_src)

    @property
    def node_feature_count(self) -> int:
        return self.node_features.shape[1] if self.node_features.ndim == 2 else 0

    @property
    def edge_feature_count(self) -> int:
        return self.edge_features.shape[1] if self.edge_features.ndim == 2 else 0

    # -- id mapping ----------------------------------------------------

    def to_internal(self, external) -> np.ndarray:
        """Map external ids to internal ids; unknown ids raise DataError."""
        ext = np.atleast_1d(np.asarray(external, dtype=np.int64))
        pos = np.searchsorted(self.external_ids, ext)
        bad = (pos >= self.node_count) | (
            self.external_ids[np.minimum(pos, self.node_count - 1)] != ext
        )
        if bad.any():
            missing = ext[bad][0]
            raise DataError(f"unknown external node id {missing}")
        return pos.astype(np.int64)

    def to_external(self, internal) -> np.ndarray:
        ids = np.atleast_1d(np.asarray(internal, dtype=np.int64))
        self._check_nodes(ids)
        return self.external_ids[ids]

    def _check_nodes(self, ids: np.ndarray) -> None:
        if len(ids) and (ids.min() < 0 or ids.max() >= self.node_count):
            raise DataError(f"internal node id out of range 0..{self.node_count - 1}")

    # -- adjacency -----------------------------------------------------

    def out_edge_ids(self, v: int) -> np.ndarray:
        return np.arange(self.out_indptr[v], self.out_indptr[v + 1], dtype=np.int64)

    def out_neighbors(self, v: int) -> np.ndarray:
        return self.edge_dst[self.out_indptr[v] : self.out_indptr[v + 1]]

    def in_neighbors(self, v: int) -> np.ndarray:
        return self.in_src[self.in_indptr[v] : self.in_indptr[v + 1]]

    def neighbors(self, v: int, direction: str = "both") -> np.ndarray:
        """Neighbor multiset of v (parallel edges repeat)."""
        if direction == "out":
            return self.out_neighbors(v)
        if direction == "in":
            return self.in_neighbors(v)
        if direction == "both":
            return np.concatenate((self.out_neighbors(v), self.in_neighbors(v)))
        raise ConfigError(f"unknown direction {direction!r}")

    def degree(self, v: int, direction: str = "total") -> int:
        if not 0 <= v < self.node_count:
            raise DataError(f"unknown node {v}")
        if direction == "out":
            return int(self._out_degree[v])
        if direction == "in":
            return int(self._in_degree[v])
        if direction in ("total", "both"):
            return int(self._total_degree[v])
        raise ConfigError(f"unknown degree direction {direction!r}")

    def degrees(self, direction: str = "total") -> np.ndarray:
        if direction == "out":
            return self._out_degree
        if direction == "in":
            return self._in_degree
        if direction in ("total", "both"):
            return self._total_degree
        raise ConfigError(f"unknown degree direction {direction!r}")

    def timestamps(self) -> np.ndarray:
        if self.timestamp_col is None:
            raise ConfigError("graph has no timestamp column configured")
        return self.edge_features[:, self.timestamp_col]

    def self_loop_count(self) -> int:
        return int(np.count_nonzero(self.edge_src == self.edge_dst))

    def stats(self) -> dict:
        return {
            "nodes": self.node_count,
            "edges": self.edge_count,
            "node_features": self.node_feature_count,
            "edge_features": self.edge_feature_count,
            "self_loops": self.self_loop_count(),
            "max_out_degree": int(self._out_degree.max()) if self.node_count else 0,
            "max_in_degree": int(self._in_degree.max()) if self.node_count else 0,
        }


def build_graph(
    node_ids,
    node_features,
    src,
    dst,
    edge_features,
    timestamp_col: int | None = None,
) -> BackgroundGraph:
    """Assemble a BackgroundGraph from raw tables of external ids.

    Internal ids are assigned by ascending external id, which keeps runs
    deterministic across platforms. Duplicate node ids and edges that
    reference unknown nodes are rejected with the offending row named.
    """
    node_ids = np.asarray(node_ids, dtype=np.int64)
    node_features = np.asarray(node_features, dtype=np.int64)
    if node_features.ndim == 1:
        node_features = node_features.reshape(len(node_ids), -1)
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    edge_features = np.asarray(edge_features, dtype=np.int64)
    if edge_features.ndim == 1:
        edge_features = edge_features.reshape(len(src), -1)

    if len(node_ids) and node_ids.min() < 0:
        raise DataError("node ids must be non-negative")
    if node_features.shape[0] != len(node_ids):
        raise DataError("node feature row count differs from node id count")
    if len(src) != len(dst) or edge_features.shape[0] != len(src):
        raise DataError("edge arrays have inconsistent lengths")

    order = np.argsort(node_ids, kind="stable")
    external = node_ids[order]
    dup = np.nonzero(external[1:] == external[:-1])[0]
    if len(dup):
        raise DataError(f"duplicate node id {external[dup[0]]}")
    feats = node_features[order]

    def map_endpoints(ext: np.ndarray, role: str) -> np.ndarray:
        pos = np.searchsorted(external, ext)
        n = len(external)
        bad = (pos >= n) | (external[np.minimum(pos, max(n - 1, 0))] != ext) if n else np.ones(len(ext), bool)
        if bad.any():
            row = int(np.nonzero(bad)[0][0])
            raise DataError(f"edge row {row}: {role} id {ext[row]} not in node table")
        return pos

    src_i = map_endpoints(src, "src") if len(src) else src
    dst_i = map_endpoints(dst, "dst") if len(dst) else dst

    if timestamp_col is not None and not 0 <= timestamp_col < edge_features.shape[1]:
        raise ConfigError(
            f"timestamp column {timestamp_col} out of range for "
            f"{edge_features.shape[1]} edge features"
        )
    return BackgroundGraph(external, feats, src_i, dst_i, edge_features, timestamp_col)


def _induce(g: BackgroundGraph, edge_mask: np.ndarray) -> BackgroundGraph:
    """Subgraph on the edges in edge_mask plus their endpoints."""
    src = g.edge_src[edge_mask]
    dst = g.edge_dst[edge_mask]
    kept = np.unique(np.concatenate((src, dst)))
    return BackgroundGraph(
        g.external_ids[kept],
        g.node_features[kept],
        np.searchsorted(kept, src),
        np.searchsorted(kept, dst),
        g.edge_features[edge_mask],
        g.timestamp_col,
    )


def filter_time_window(g: BackgroundGraph, window: TimeWindow) -> BackgroundGraph:
    """Keep edges with start <= t < end and nodes incident to them."""
    ts = g.timestamps()
    mask = (ts >= window.start) & (ts < window.end)
    return _induce(g, mask)


def largest_weak_component(g: BackgroundGraph) -> BackgroundGraph:
    """Induced subgraph on the largest weakly connected component.

    Edge directions are ignored for connectivity but preserved in the
    output. Ties between equal-sized components go to the one containing
    the smallest external node id. An empty graph maps to itself.
    """
    n = g.node_count
    if n == 0:
        return g
    parent = np.arange(n)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]  # path halving
            x = parent[x]
        return x

    for a, b in zip(g.edge_src.tolist(), g.edge_dst.tolist()):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[rb] = ra

    roots = np.fromiter((find(i) for i in range(n)), dtype=np.int64, count=n)
    sizes = np.bincount(roots, minlength=n)
    best_size = sizes.max()
    # internal order mirrors external order, so the candidate containing
    # the smallest internal id also contains the smallest external id
    candidates = np.nonzero(sizes == best_size)[0]
    winner = -1
    for v in range(n):
        if roots[v] in candidates:
            winner = roots[v]
            break
    node_mask = roots == winner
    edge_mask = node_mask[g.edge_src]
    if not edge_mask.any() and best_size == 1:
        # component is a single isolated node; keep it without edges
        return BackgroundGraph(
            g.external_ids[node_mask],
            g.node_features[node_mask],
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            g.edge_features[:0],
            g.timestamp_col,
        )
    return _induce(g, edge_mask)


def degree(g: BackgroundGraph, v: int, direction: str = "total") -> int:
    return g.degree(v, direction)


# -- binary cache ------------------------------------------------------
#
# Layout (all little-endian):
#   magic "SGF1"
#   u64 N, E, F_v, F_e; i64 timestamp column (-1 when absent)
#   i64[N]   external ids
#   i64[N+1] out indptr
#   i64[E]   out neighbors (canonical edge dst; the edge list)
#   i64[N+1] in indptr
#   i64[E]   in neighbors (src of each in-edge)
#   i64[E]   in edge ids (canonical edge row per in-adjacency slot)
#   i64[N*F_v] node features, row-major
#   i64[E*F_e] edge features, row-major

def _pack_header(g: BackgroundGraph) -> bytes:
    ts = -1 if g.timestamp_col is None else g.timestamp_col
    return CACHE_MAGIC + struct.pack(
        "<QQQQq",
        g.node_count,
        g.edge_count,
        g.node_feature_count,
        g.edge_feature_count,
        ts,
    )


def save_cache(g: BackgroundGraph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_pack_header(g))
        for arr in (
            g.external_ids,
            g.out_indptr,
            g.edge_dst,
            g.in_indptr,
            g.in_src,
            g.in_edge_ids,
            g.node_features,
            g.edge_features,
        ):
            fh.write(np.ascontiguousarray(arr, dtype="<i8").tobytes())


def load_cache(path) -> BackgroundGraph:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CACHE_MAGIC:
        raise DataError(f"{path}: not a graph cache (bad magic)")
    n, e, fv, fe, ts = struct.unpack_from("<QQQQq", blob, 4)
    off = 4 + struct.calcsize("<QQQQq")

    def take(count: int) -> np.ndarray:
        nonlocal off
        nbytes = count * 8
        if off + nbytes > len(blob):
            raise DataError(f"{path}: truncated graph cache")
        arr = np.frombuffer(blob, dtype="<i8", count=count, offset=off).astype(np.int64)
        off += nbytes
        return arr

    external = take(n)
    out_indptr = take(n + 1)
    edge_dst = take(e)
    take(n + 1)  # in indptr, rebuilt by the constructor
    take(e)  # in neighbors, rebuilt
    take(e)  # in edge ids, rebuilt
    node_feats = take(n * fv).reshape(n, fv)
    edge_feats = take(e * fe).reshape(e, fe)
    if off != len(blob):
        raise DataError(f"{path}: trailing bytes in graph cache")
    edge_src = np.repeat(np.arange(n, dtype=np.int64), np.diff(out_indptr))
    return BackgroundGraph(
        external,
        node_feats,
        edge_src,
        edge_dst,
        edge_feats,
        None if ts < 0 else int(ts),
    )
