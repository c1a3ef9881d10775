"""Finite-difference checks of the hand-written gradients.

Each instance builds a random two-graph batch and a small random model,
evaluates a scalar loss, and compares the analytic gradient of every
parameter entry with a central difference.  Dropout masks are replayed from
a fixed seed so the loss is a deterministic function of the parameters.
"""

from __future__ import annotations

import numpy as np

from funqg import autodiff as ad
from funqg.featurizer import MolGraph
from funqg.models import GraphBatch, ModelConfig, forward, init_params


def random_graph(rng: np.random.Generator, n_i: int, e_i: int, max_nodes: int = 6) -> MolGraph:
    """Connected random graph: a random tree plus a few extra edges."""
    n = int(rng.integers(1, max_nodes + 1))
    edges = {(int(rng.integers(0, v)), v) for v in range(1, n)}
    for _ in range(int(rng.integers(0, 3))):
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist()) if n > 1 else (0, 0)
        if u != v:
            edges.add((u, v))
    edges = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return MolGraph(rng.normal(size=(n, n_i)), edges, rng.normal(size=(len(edges), e_i)))


def random_instance(rng: np.random.Generator):
    arch = ["mpnn", "dmpnn"][int(rng.integers(2))]
    cfg = ModelConfig(
        architecture=arch,
        hidden=int(rng.integers(2, 5)),
        steps=int(rng.integers(1, 4)),
        ffn_hidden=int(rng.integers(2, 5)),
        dropout=float(rng.choice([0.0, 0.2])),
        readout=["mean", "sum"][int(rng.integers(2))],
        out_dim=int(rng.integers(1, 3)),
        n_i=5,
        e_i=3,
    )
    graphs = [random_graph(rng, cfg.n_i, cfg.e_i) for _ in range(2)]
    task = ["classification", "regression"][int(rng.integers(2))]
    y = rng.integers(0, 2, size=(2, cfg.out_dim)).astype(float) if task == "classification" else rng.normal(size=(2, cfg.out_dim))
    mask = np.ones((2, cfg.out_dim))
    if cfg.out_dim > 1:
        mask[0, 0] = 0.0
    return cfg, graphs, task, y, mask


def check_instance(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    cfg, graphs, task, y, mask = random_instance(rng)
    store = init_params(cfg, seed=seed)
    # move biases off zero so their gradients are exercised too
    for name, p in store.items():
        p += 0.1 * rng.normal(size=p.shape)
    batch = GraphBatch(graphs)
    lossf = ad.masked_bce if task == "classification" else ad.mse

    def loss_tensor(leaves):
        out = forward(batch, leaves, cfg, training=True, rng=np.random.default_rng(seed + 1))
        return lossf(out, y, mask)

    leaves = store.leaves()
    ad.backward(loss_tensor(leaves))
    store.accumulate(leaves)
    worst = 0.0
    for name, p in store.items():
        numeric = ad.numerical_gradient(lambda: loss_tensor(store.leaves()).item(), p)
        worst = max(worst, ad.max_relative_error(store.grads[name], numeric))
    return {"seed": seed, "architecture": cfg.architecture, "task": task, "max_rel_error": worst}


def run_suite(instances: int = 20, seed: int = 0) -> list[dict]:
    return [check_instance(seed * 1000 + i) for i in range(instances)]
