"""Minimal message-passing networks for subgraph classification.

Three modes share one architecture and differ only in which edges they
aggregate over:

* glass: message passing over the background graph, with a binary
  in-subgraph indicator appended to node features and a separate weight
  set selected per node by that indicator (the 0-1 labeling trick).
* gnnseg: edges restricted to pairs inside the same subgraph, so every
  subgraph is an isolated graph.
* meanpool: no edges at all; per-node transforms followed by pooling.

The forward/backward passes are written out by hand in numpy (float64),
which keeps gradients checkable against finite differences, and the
optimizer is Adam with standard moment defaults.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, DataError, NumericError, UndefinedMetricError
from .graph import BackgroundGraph
from .metrics import pr_auc, roc_auc
from .sampling import Minibatch, Splits, batch_rng, build_subgraph_minibatch, make_minibatches

MODES = ("glass", "gnnseg", "meanpool")
MODEL_MAGIC = b"SGM1"

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    lr: float = 0.001
    batch_size: int = 4000
    epochs: int = 100
    pos_weight: float | None = None  # None: #neg / #pos from the training split
    mode: str = "glass"
    hidden: int = 16
    fanouts: tuple[int, ...] | None = None  # None: full neighborhoods
    direction: str = "both"
    use_node_features: bool = False
    patience: int = 10  # 0 disables early stopping

    def __post_init__(self) -> None:
        if self.lr < 0:
            raise ConfigError("learning rate must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch size must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.hidden < 1:
            raise ConfigError("hidden dimension must be >= 1")


@dataclass
class ModelParams:
    dims: tuple[int, int, int]  # (input, hidden 1, hidden 2)
    tensors: dict[str, np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.tensors.items()})


def _tensor_shapes(dims: tuple[int, int, int]) -> list[tuple[str, tuple[int, ...]]]:
    d_in, d1, d2 = dims
    return [
        ("l0.w_self", (2, d_in, d1)),
        ("l0.w_nbr", (2, d_in, d1)),
        ("l0.bias", (2, d1)),
        ("l1.w_self", (2, d1, d2)),
        ("l1.w_nbr", (2, d1, d2)),
        ("l1.bias", (2, d2)),
        ("head.w", (d2,)),
        ("head.b", ()),
    ]


def init_params(dims, seed: int) -> ModelParams:
    """Deterministic uniform init scaled by fan-in.

    Biases draw from the same distribution as their layer's weights; a
    nonzero bias keeps pre-activations off the exact ReLU kink, which
    matters for finite-difference verification.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ConfigError(f"dims must be three positive integers, got {dims}")
    fan_in = {"l0": dims[0], "l1": dims[1], "head": dims[2]}
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in _tensor_shapes(dims):
        bound = 1.0 / np.sqrt(fan_in[name.split(".")[0]])
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(dims=dims, tensors=tensors)


def param_count(params: ModelParams) -> int:
    return sum(t.size for t in params.tensors.values())


# -- batch tensorization ------------------------------------------------


@dataclass
class Gather:
    src: np.ndarray  # row index of the aggregating node
    dst: np.ndarray  # row index of the neighbor being averaged
    divisor: np.ndarray  # per-row neighbor count, clamped to >= 1


@dataclass
class BatchTensors:
    x: np.ndarray  # (rows, features)
    ind: np.ndarray  # (rows,) indicator bit
    gathers: list[Gather]  # evaluation order: deepest hop first
    pool_rows: np.ndarray  # row of each prefix slot
    ranges: list[tuple[int, int]]


def degree_feature(degrees: np.ndarray) -> np.ndarray:
    """log2-binned total degree."""
    return np.floor(np.log2(degrees.astype(float) + 1.0))


def _edges_from_frontier(g: BackgroundGraph, frontier: np.ndarray, direction: str) -> np.ndarray:
    srcs, dsts = [], []
    for u in frontier.tolist():
        nbrs = g.neighbors(u, direction)
        if len(nbrs) == 0:
            continue
        srcs.append(np.full(len(nbrs), u, dtype=np.int64))
        dsts.append(nbrs.astype(np.int64))
    if not srcs:
        return np.empty((0, 2), dtype=np.int64)
    return np.stack((np.concatenate(srcs), np.concatenate(dsts)), axis=1)


def _gather_for(edges: np.ndarray, rows: np.ndarray) -> Gather:
    if len(edges) == 0:
        return Gather(
            src=np.empty(0, dtype=np.int64),
            dst=np.empty(0, dtype=np.int64),
            divisor=np.ones(len(rows)),
        )
    src = np.searchsorted(rows, edges[:, 0])
    dst = np.searchsorted(rows, edges[:, 1])
    counts = np.bincount(src, minlength=len(rows)).astype(float)
    return Gather(src=src, dst=dst, divisor=np.maximum(counts, 1.0))


def build_batch_tensors(
    g: BackgroundGraph,
    mb: Minibatch,
    mode: str,
    use_node_features: bool = False,
    direction: str = "both",
    n_layers: int = 2,
) -> BatchTensors:
    """Resolve a minibatch into dense arrays plus aggregation index maps.

    In glass mode the minibatch's sampled layer adjacency is used when
    present; otherwise the full neighborhood is expanded from the graph.
    """
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    prefix = mb.node_list[: mb.prefix_len]
    members = np.unique(prefix)

    if mode == "glass":
        if mb.layer_edges:
            if len(mb.layer_edges) != n_layers:
                raise ContractError(
                    f"model has {n_layers} layers but the minibatch sampled "
                    f"{len(mb.layer_edges)}"
                )
            hop_edges = mb.layer_edges
        else:
            hop_edges = []
            frontier = members
            for _ in range(n_layers):
                edges = _edges_from_frontier(g, frontier, direction)
                hop_edges.append(edges)
                if len(edges):
                    frontier = np.union1d(frontier, edges[:, 1])
        parts = [mb.node_list] + [e.reshape(-1) for e in hop_edges if len(e)]
        rows = np.unique(np.concatenate(parts))
        eval_edges = list(reversed(hop_edges))
    elif mode == "gnnseg":
        rows = np.unique(prefix)
        co: dict[int, set[int]] = {}
        for s, e in mb.subgraph_ranges:
            chunk = mb.node_list[s:e].tolist()
            for v in chunk:
                co.setdefault(v, set()).update(chunk)
        srcs, dsts = [], []
        for u in rows.tolist():
            nbrs = g.neighbors(u, direction)
            if len(nbrs) == 0:
                continue
            allowed = co[u]
            keep = np.fromiter((w in allowed for w in nbrs.tolist()), dtype=bool, count=len(nbrs))
            if keep.any():
                kept = nbrs[keep]
                srcs.append(np.full(len(kept), u, dtype=np.int64))
                dsts.append(kept.astype(np.int64))
        if srcs:
            edges = np.stack((np.concatenate(srcs), np.concatenate(dsts)), axis=1)
        else:
            edges = np.empty((0, 2), dtype=np.int64)
        eval_edges = [edges] * n_layers
    else:  # meanpool
        rows = np.unique(prefix)
        eval_edges = [np.empty((0, 2), dtype=np.int64)] * n_layers

    gathers = [_gather_for(e, rows) for e in eval_edges]
    pool_rows = np.searchsorted(rows, prefix)
    ind = np.isin(rows, members).astype(np.int64)
    cols = [degree_feature(g.degrees("total")[rows])[:, None], ind.astype(float)[:, None]]
    if use_node_features:
        cols.append(g.node_features[rows].astype(float))
    x = np.concatenate(cols, axis=1)
    return BatchTensors(x=x, ind=ind, gathers=gathers, pool_rows=pool_rows, ranges=mb.subgraph_ranges)


# -- forward / backward --------------------------------------------------


def forward_tensors(params: ModelParams, bt: BatchTensors) -> tuple[np.ndarray, dict]:
    """Two rounds of mean-aggregation message passing, ReLU, mean-pool, head."""
    if bt.x.shape[1] != params.dims[0]:
        raise ContractError(
            f"batch has {bt.x.shape[1]} input features, model expects {params.dims[0]}"
        )
    t = params.tensors
    masks = (bt.ind == 0, bt.ind == 1)
    h = bt.x
    cache = {"h": [h], "agg": [], "z": []}
    for layer in range(2):
        gather = bt.gathers[layer]
        agg = np.zeros_like(h)
        if len(gather.src):
            np.add.at(agg, gather.src, h[gather.dst])
        agg /= gather.divisor[:, None]
        z = np.empty((h.shape[0], t[f"l{layer}.bias"].shape[1]))
        for i, m in enumerate(masks):
            z[m] = h[m] @ t[f"l{layer}.w_self"][i] + agg[m] @ t[f"l{layer}.w_nbr"][i]
            z[m] += t[f"l{layer}.bias"][i]
        cache["agg"].append(agg)
        cache["z"].append(z)
        h = np.maximum(z, 0.0)
        cache["h"].append(h)
    pooled = np.stack([h[bt.pool_rows[s:e]].mean(axis=0) for s, e in bt.ranges])
    logits = pooled @ t["head.w"] + t["head.b"]
    cache["pooled"] = pooled
    return logits, cache


def backward_tensors(
    params: ModelParams, bt: BatchTensors, cache: dict, dlogits: np.ndarray
) -> dict[str, np.ndarray]:
    t = params.tensors
    masks = (bt.ind == 0, bt.ind == 1)
    grads = {k: np.zeros_like(v) for k, v in t.items()}
    grads["head.w"] = cache["pooled"].T @ dlogits
    grads["head.b"] = np.asarray(dlogits.sum())

    dh = np.zeros_like(cache["h"][2])
    for k, (s, e) in enumerate(bt.ranges):
        dh[bt.pool_rows[s:e]] += dlogits[k] * t["head.w"] / (e - s)

    for layer in (1, 0):
        z = cache["z"][layer]
        dz = dh * (z > 0.0)
        h_prev = cache["h"][layer]
        agg = cache["agg"][layer]
        gather = bt.gathers[layer]
        dh_prev = np.zeros_like(h_prev)
        dagg = np.zeros_like(agg)
        for i, m in enumerate(masks):
            grads[f"l{layer}.w_self"][i] = h_prev[m].T @ dz[m]
            grads[f"l{layer}.w_nbr"][i] = agg[m].T @ dz[m]
            grads[f"l{layer}.bias"][i] = dz[m].sum(axis=0)
            dh_prev[m] = dz[m] @ t[f"l{layer}.w_self"][i].T
            dagg[m] = dz[m] @ t[f"l{layer}.w_nbr"][i].T
        if len(gather.src):
            np.add.at(
                dh_prev,
                gather.dst,
                dagg[gather.src] / gather.divisor[gather.src, None],
            )
        dh = dh_prev
    return grads


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def weighted_bce(logits: np.ndarray, labels: np.ndarray, pos_weight: float) -> tuple[float, np.ndarray]:
    """Mean weighted binary cross-entropy and its gradient in the logits."""
    y = labels.astype(float)
    softplus = np.logaddexp(0.0, logits)
    softplus_neg = np.logaddexp(0.0, -logits)
    per = pos_weight * y * softplus_neg + (1.0 - y) * softplus
    loss = float(per.mean())
    s = _sigmoid(logits)
    dlogits = (s * (pos_weight * y + 1.0 - y) - pos_weight * y) / len(y)
    return loss, dlogits


def loss_and_grads(
    params: ModelParams, bt: BatchTensors, labels: np.ndarray, pos_weight: float = 1.0
) -> tuple[float, dict[str, np.ndarray], np.ndarray]:
    logits, cache = forward_tensors(params, bt)
    loss, dlogits = weighted_bce(logits, labels, pos_weight)
    grads = backward_tensors(params, bt, cache, dlogits)
    return loss, grads, logits


# -- optimizer ------------------------------------------------------------


def adam_init(params: ModelParams) -> dict:
    return {
        "m": {k: np.zeros_like(v) for k, v in params.tensors.items()},
        "v": {k: np.zeros_like(v) for k, v in params.tensors.items()},
        "t": 0,
    }


def adam_update(
    params: ModelParams, grads: dict[str, np.ndarray], state: dict, lr: float
) -> tuple[ModelParams, dict]:
    t = state["t"] + 1
    new_m, new_v, new_p = {}, {}, {}
    for k, p in params.tensors.items():
        gk = grads[k]
        m = _ADAM_B1 * state["m"][k] + (1 - _ADAM_B1) * gk
        v = _ADAM_B2 * state["v"][k] + (1 - _ADAM_B2) * gk * gk
        m_hat = m / (1 - _ADAM_B1**t)
        v_hat = v / (1 - _ADAM_B2**t)
        new_m[k] = m
        new_v[k] = v
        new_p[k] = p - lr * m_hat / (np.sqrt(v_hat) + _ADAM_EPS)
    return ModelParams(params.dims, new_p), {"m": new_m, "v": new_v, "t": t}


def train_step(
    params: ModelParams,
    opt_state: dict,
    bt: BatchTensors,
    labels: np.ndarray,
    cfg: TrainConfig,
) -> tuple[ModelParams, dict, float, dict[str, np.ndarray]]:
    loss, grads, logits = loss_and_grads(
        params, bt, labels, cfg.pos_weight if cfg.pos_weight is not None else 1.0
    )
    if not np.isfinite(loss):
        raise NumericError(
            f"non-finite loss over {len(labels)} subgraphs "
            f"(logit range {np.min(logits):.3g}..{np.max(logits):.3g})"
        )
    new_params, new_state = adam_update(params, grads, opt_state, cfg.lr)
    return new_params, new_state, loss, grads


# -- training and inference --------------------------------------------


def _record_labels(records) -> np.ndarray:
    ys = []
    for rec in records:
        if rec.label is None or rec.label.value not in ("licit", "suspicious"):
            raise ConfigError(f"record {rec.id} has no binary label")
        ys.append(1 if rec.label.value == "suspicious" else 0)
    return np.asarray(ys, dtype=np.int64)


def predict_scores(
    params: ModelParams,
    g: BackgroundGraph,
    records,
    mode: str,
    use_node_features: bool = False,
    direction: str = "both",
    fanouts=None,
    seed: int = 0,
) -> np.ndarray:
    """Score each record separately; the indicator marks only its nodes.

    Full neighborhoods by default, which makes inference exactly
    reproducible; pass fanouts for seed-controlled sampled inference.
    """
    scores = np.empty(len(records))
    for i, rec in enumerate(records):
        rng = batch_rng(seed, 0, i)
        mb = build_subgraph_minibatch(
            g, [rec], fanouts if mode == "glass" else None, rng, direction
        )
        bt = build_batch_tensors(g, mb, mode, use_node_features, direction)
        logits, _ = forward_tensors(params, bt)
        scores[i] = _sigmoid(logits)[0]
    return scores


def train(
    g: BackgroundGraph,
    records,
    splits: Splits,
    cfg: TrainConfig,
    seed: int = 0,
) -> tuple[ModelParams, list[dict]]:
    """Epoch loop over shuffled training minibatches with validation PR-AUC.

    Early-stops after cfg.patience epochs without validation improvement
    (when the validation metric is defined). Returns the final parameters
    and the per-epoch history.
    """
    if len(splits.train) == 0:
        raise ConfigError("training split is empty")
    records = list(records)
    y = _record_labels(records)
    train_idx = np.asarray(splits.train, dtype=np.int64)
    val_records = [records[i] for i in splits.val]
    val_y = y[splits.val] if len(splits.val) else np.empty(0, dtype=np.int64)

    pos_weight = cfg.pos_weight
    if pos_weight is None:
        n_pos = int(y[train_idx].sum())
        n_neg = len(train_idx) - n_pos
        pos_weight = (n_neg / n_pos) if n_pos and n_neg else 1.0
    run_cfg = TrainConfig(**{**cfg.__dict__, "pos_weight": pos_weight})

    in_dim = 2 + (g.node_feature_count if cfg.use_node_features else 0)
    params = init_params((in_dim, cfg.hidden, cfg.hidden), seed)
    opt = adam_init(params)

    history: list[dict] = []
    best = -np.inf
    since_best = 0
    for epoch in range(cfg.epochs):
        batches = make_minibatches(train_idx, cfg.batch_size, batch_rng(seed, epoch, 0))
        losses = []
        for bi, batch in enumerate(batches):
            recs = [records[j] for j in batch]
            rng = batch_rng(seed, epoch, bi + 1)
            fans = cfg.fanouts if (cfg.fanouts and cfg.mode == "glass") else None
            mb = build_subgraph_minibatch(g, recs, fans, rng, cfg.direction, labels=y[batch])
            bt = build_batch_tensors(g, mb, cfg.mode, cfg.use_node_features, cfg.direction)
            params, opt, loss, _ = train_step(params, opt, bt, y[batch], run_cfg)
            losses.append(loss)

        val_pr = val_roc = float("nan")
        if len(val_records):
            val_scores = predict_scores(
                params, g, val_records, cfg.mode, cfg.use_node_features, cfg.direction
            )
            try:
                val_pr = pr_auc(val_scores, val_y)
                val_roc = roc_auc(val_scores, val_y)
            except UndefinedMetricError:
                pass
        history.append(
            {
                "epoch": epoch,
                "loss": float(np.mean(losses)),
                "val_pr_auc": val_pr,
                "val_roc_auc": val_roc,
            }
        )
        if np.isfinite(val_pr):
            if val_pr > best + 1e-12:
                best = val_pr
                since_best = 0
            else:
                since_best += 1
                if cfg.patience and since_best >= cfg.patience:
                    break
    return params, history


# -- checkpoints ----------------------------------------------------------

_MODE_CODES = {m: i for i, m in enumerate(MODES)}
_DIR_CODES = {"both": 0, "out": 1, "in": 2}


def save_model(path, params: ModelParams, meta: dict | None = None) -> None:
    meta = meta or {}
    mode = meta.get("mode", "glass")
    direction = meta.get("direction", "both")
    header = MODEL_MAGIC + struct.pack(
        "<BBBB3Q",
        1,  # format version
        _MODE_CODES[mode],
        1 if meta.get("use_node_features") else 0,
        _DIR_CODES[direction],
        *params.dims,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for name, _ in _tensor_shapes(params.dims):
            fh.write(np.ascontiguousarray(params.tensors[name], dtype="<f8").tobytes())


def load_model(path) -> tuple[ModelParams, dict]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MODEL_MAGIC:
        raise DataError(f"{path}: not a model checkpoint (bad magic)")
    version, mode_code, use_feats, dir_code, d_in, d1, d2 = struct.unpack_from("<BBBB3Q", blob, 4)
    if version != 1:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    off = 4 + struct.calcsize("<BBBB3Q")
    dims = (int(d_in), int(d1), int(d2))
    tensors = {}
    for name, shape in _tensor_shapes(dims):
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if off + nbytes > len(blob):
            raise DataError(f"{path}: truncated checkpoint")
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).astype(float)
        tensors[name] = arr.reshape(shape)
        off += nbytes
    if off != len(blob):
        raise DataError(f"{path}: trailing bytes in checkpoint")
    meta = {
        "mode": MODES[mode_code],
        "use_node_features": bool(use_feats),
        "direction": {v: k for k, v in _DIR_CODES.items()}[dir_code],
    }
    return ModelParams(dims=dims, tensors=tensors), meta
