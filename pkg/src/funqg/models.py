"""MPNN and directed MPNN with mean-pooling readout and a two-hidden-layer head.

Weight shapes follow the usual (out, in) convention::

    MPNN   W_i: h x n_i        W_m: h x (h + e_i)   W_o: h x (h + n_i)
    DMPNN  W_i: h x (n_i+e_i)  W_m: h x h           W_o: h x (h + n_i)

The message-passing weights carry no bias.  The head is
``relu(W1 . + b1) -> relu(W2 . + b2) -> W3 . + b3`` with hidden width ``f``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from funqg import autodiff as ad
from funqg.autodiff import Tensor
from funqg.errors import EmptyGraph, ShapeMismatch
from funqg.featurizer import EDGE_DIM, NODE_DIM, MolGraph
from funqg.optim import ParamStore

ARCHITECTURES = ("mpnn", "dmpnn")


@dataclass
class ModelConfig:
    architecture: str = "dmpnn"
    hidden: int = 64
    steps: int = 3
    ffn_hidden: int | None = None
    dropout: float = 0.0
    readout: str = "mean"
    out_dim: int = 1
    n_i: int = NODE_DIM
    e_i: int = EDGE_DIM

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.readout not in ("mean", "sum"):
            raise ValueError(f"readout must be 'mean' or 'sum', got {self.readout!r}")
        if self.steps < 1 or self.hidden < 1 or self.out_dim < 1:
            raise ValueError("steps, hidden and out_dim must be >= 1")
        if self.ffn_hidden is None:
            self.ffn_hidden = self.hidden

    def to_dict(self) -> dict:
        return asdict(self)


class GraphBatch:
    """Several graphs stacked into one disconnected graph.

    Each undirected edge ``k`` becomes arcs ``2k`` (u->v) and ``2k+1``
    (v->u), so ``rev[a] == a ^ 1``; both arcs carry the edge's features.
    """

    def __init__(self, graphs: Sequence[MolGraph]):
        if not graphs:
            raise EmptyGraph("empty batch")
        xs, srcs, dsts, efeats, gids = [], [], [], [], []
        offset = 0
        for gi, g in enumerate(graphs):
            if g.num_nodes == 0:
                raise EmptyGraph(f"graph {gi} has no nodes")
            xs.append(g.node_features)
            e = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2) + offset
            src = np.empty(2 * len(e), dtype=np.int64)
            dst = np.empty(2 * len(e), dtype=np.int64)
            src[0::2], dst[0::2] = e[:, 0], e[:, 1]
            src[1::2], dst[1::2] = e[:, 1], e[:, 0]
            srcs.append(src)
            dsts.append(dst)
            efeats.append(np.repeat(np.asarray(g.edge_features, dtype=np.float64), 2, axis=0))
            gids.append(np.full(g.num_nodes, gi, dtype=np.int64))
            offset += g.num_nodes
        self.num_graphs = len(graphs)
        self.x = np.concatenate(xs).astype(np.float64)
        self.src = np.concatenate(srcs)
        self.dst = np.concatenate(dsts)
        widths = {f.shape[1] for f in efeats}
        if len(widths) != 1:
            raise ShapeMismatch(f"edge feature widths differ across graphs: {sorted(widths)}")
        self.arc_features = np.concatenate(efeats)
        self.graph_ids = np.concatenate(gids)
        self.rev = np.arange(len(self.src), dtype=np.int64) ^ 1
        self._exclusion = None

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_arcs(self) -> int:
        return len(self.src)

    def exclusion_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(target arc, contributing arc) pairs for the non-backtracking sum.

        Arc ``a = v->w`` receives every arc ``k->v`` except its own reverse.
        """
        if self._exclusion is None:
            by_dst = np.argsort(self.dst, kind="stable")
            indeg = np.bincount(self.dst, minlength=self.num_nodes)
            start = np.concatenate([[0], np.cumsum(indeg)[:-1]])
            counts = indeg[self.src]
            tgt = np.repeat(np.arange(self.num_arcs, dtype=np.int64), counts)
            within = np.arange(len(tgt)) - np.repeat(np.cumsum(counts) - counts, counts)
            contrib = by_dst[np.repeat(start[self.src], counts) + within]
            keep = contrib != self.rev[tgt]
            self._exclusion = (tgt[keep], contrib[keep].astype(np.int64))
        return self._exclusion


def _shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    h, n_i, e_i, f = cfg.hidden, cfg.n_i, cfg.e_i, cfg.ffn_hidden
    if cfg.architecture == "mpnn":
        core = [("W_i", (h, n_i)), ("W_m", (h, h + e_i)), ("W_o", (h, h + n_i))]
    else:
        core = [("W_i", (h, n_i + e_i)), ("W_m", (h, h)), ("W_o", (h, h + n_i))]
    head = [
        ("ffn.W1", (f, h)),
        ("ffn.b1", (f,)),
        ("ffn.W2", (f, f)),
        ("ffn.b2", (f,)),
        ("ffn.W3", (cfg.out_dim, f)),
        ("ffn.b3", (cfg.out_dim,)),
    ]
    return core + head


def init_params(cfg: ModelConfig, seed: int = 0) -> ParamStore:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    for name, shape in _shapes(cfg):
        if len(shape) == 1:
            store.add(name, np.zeros(shape))
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            store.add(name, rng.uniform(-limit, limit, size=shape))
    return store


def count_parameters(cfg: ModelConfig) -> int:
    h, n_i, e_i, f, out = cfg.hidden, cfg.n_i, cfg.e_i, cfg.ffn_hidden, cfg.out_dim
    if cfg.architecture == "dmpnn":
        core = h * (n_i + e_i) + h * h + h * (h + n_i)
    else:
        core = h * n_i + h * (h + e_i) + h * (h + n_i)
    return core + (h * f + f) + (f * f + f) + (f * out + out)


def _leaves(params) -> dict[str, Tensor]:
    return params.leaves() if isinstance(params, ParamStore) else params


def _check_widths(batch: GraphBatch, cfg: ModelConfig) -> None:
    if batch.x.shape[1] != cfg.n_i or batch.arc_features.shape[1] != cfg.e_i:
        raise ShapeMismatch(
            f"batch features ({batch.x.shape[1]}, {batch.arc_features.shape[1]}) "
            f"vs config ({cfg.n_i}, {cfg.e_i})"
        )


def mpnn_node_states(batch: GraphBatch, p: dict[str, Tensor], cfg: ModelConfig) -> Tensor:
    x = Tensor(batch.x)
    e = Tensor(batch.arc_features)
    n = batch.num_nodes
    h0 = ad.linear(x, p["W_i"])
    h = h0
    for _ in range(cfg.steps):
        # arc w->v carries cat(h_w, e_wv) to v
        msg = ad.segment_sum(ad.concat_cols([ad.row_select(h, batch.src), e]), batch.dst, n)
        h = ad.relu(ad.add(h0, ad.linear(msg, p["W_m"])))
    m = ad.segment_sum(ad.row_select(h, batch.src), batch.dst, n)
    return ad.relu(ad.linear(ad.concat_cols([x, m]), p["W_o"]))


def dmpnn_node_states(batch: GraphBatch, p: dict[str, Tensor], cfg: ModelConfig) -> Tensor:
    x = Tensor(batch.x)
    n = batch.num_nodes
    h0 = ad.relu(ad.linear(ad.concat_cols([ad.row_select(x, batch.src), Tensor(batch.arc_features)]), p["W_i"]))
    h = h0
    tgt, contrib = batch.exclusion_pairs()
    for _ in range(cfg.steps):
        m = ad.segment_sum(ad.row_select(h, contrib), tgt, batch.num_arcs)
        h = ad.relu(ad.add(h0, ad.linear(m, p["W_m"])))
    # node state sums the final states of the arcs leaving it
    m_v = ad.segment_sum(h, batch.src, n)
    return ad.relu(ad.linear(ad.concat_cols([x, m_v]), p["W_o"]))


def readout_ffn(
    node_states: Tensor,
    graph_ids,
    num_graphs: int,
    params,
    cfg: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    p = _leaves(params)
    pool = ad.segment_mean if cfg.readout == "mean" else ad.segment_sum
    z = pool(node_states, graph_ids, num_graphs)
    z = ad.dropout(ad.relu(ad.linear(z, p["ffn.W1"], p["ffn.b1"])), cfg.dropout, rng, training)
    z = ad.dropout(ad.relu(ad.linear(z, p["ffn.W2"], p["ffn.b2"])), cfg.dropout, rng, training)
    return ad.linear(z, p["ffn.W3"], p["ffn.b3"])


def forward(
    batch: GraphBatch,
    params,
    cfg: ModelConfig,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Per-graph outputs (logits for classification), shape ``(num_graphs, out_dim)``."""
    _check_widths(batch, cfg)
    p = _leaves(params)
    for name, shape in _shapes(cfg):
        want = shape if len(shape) == 2 else (1, shape[0])
        if p[name].shape != want:
            raise ShapeMismatch(f"{name}: expected {want}, got {p[name].shape}")
    states = mpnn_node_states(batch, p, cfg) if cfg.architecture == "mpnn" else dmpnn_node_states(batch, p, cfg)
    states = ad.dropout(states, cfg.dropout, rng, training)
    return readout_ffn(states, batch.graph_ids, batch.num_graphs, p, cfg, training, rng)


def mpnn_forward(batch, params, cfg, training=False, rng=None) -> Tensor:
    if cfg.architecture != "mpnn":
        raise ValueError("config is not an MPNN")
    return forward(batch, params, cfg, training, rng)


def dmpnn_forward(batch, params, cfg, training=False, rng=None) -> Tensor:
    if cfg.architecture != "dmpnn":
        raise ValueError("config is not a DMPNN")
    return forward(batch, params, cfg, training, rng)


def predict(graphs: Sequence[MolGraph], store: ParamStore, cfg: ModelConfig, batch_size: int = 256) -> np.ndarray:
    out = []
    for i in range(0, len(graphs), batch_size):
        out.append(forward(GraphBatch(graphs[i : i + batch_size]), store, cfg).value)
    return np.concatenate(out) if out else np.zeros((0, cfg.out_dim))
