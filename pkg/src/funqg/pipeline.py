"""Datasets, graph caches, splits, training, evaluation and random search.

Everything that touches disk uses line-delimited JSON.  A graph cache starts
with one manifest line::

    {"coarsen": true, "count": 642, "e_i": 9, "format": "funqg-cache",
     "n_i": 37, "task_type": "regression", "targets": ["expt"],
     "tool_version": "0.1.0", "version": 1}

followed by one record per molecule::

    {"edge_features": [[...]], "edges": [[0, 1]], "index": 0,
     "mask": [1], "node_features": [[...]], "num_atoms": 3,
     "scaffold_key": "0000000000000000", "smiles": "CCO", "targets": [-5.0]}

Keys are sorted and floats use Python's shortest round-trip repr, so equal
inputs always give byte-identical files.  Masked targets are ``null``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from funqg import __version__
from funqg.coarsen import funqg
from funqg.errors import (
    AllMasked,
    DegenerateSplit,
    EmptyDataset,
    FunQGError,
    ManifestMismatch,
    MissingColumn,
    NonFiniteLoss,
    NonFiniteValue,
    ShapeMismatch,
    SingleClass,
)
from funqg.featurizer import EDGE_DIM, NODE_DIM, MolGraph, featurize
from funqg.metrics import multitask_rmse, multitask_roc_auc
from funqg.models import GraphBatch, ModelConfig, forward, init_params
from funqg.optim import ParamStore, adam_step, max_norm, params_from_dict, params_to_dict
from funqg import autodiff as ad
from funqg.scaffold import ScaffoldKey, SplitAssignment, murcko_scaffold, scaffold_split
from funqg.smiles import read_smiles

log = logging.getLogger(__name__)

CACHE_FORMAT = "funqg-cache"
SPLIT_FORMAT = "funqg-split"
FORMAT_VERSION = 1
TASK_TYPES = ("classification", "regression")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def num_workers(default: int = 1) -> int:
    """Worker cap from ``FUNQG_WORKERS`` (at least 1)."""
    try:
        return max(1, int(os.environ.get("FUNQG_WORKERS", default)))
    except ValueError:
        return default


# --------------------------------------------------------------------------- datasets


@dataclass
class DatasetSpec:
    csv_path: str
    smiles_column: str
    target_columns: list[str]
    task_type: str = "classification"

    def __post_init__(self):
        if not self.target_columns:
            raise ValueError("at least one target column is required")
        if self.task_type not in TASK_TYPES:
            raise ValueError(f"task_type must be one of {TASK_TYPES}, got {self.task_type!r}")


@dataclass
class Record:
    index: int
    smiles: str
    targets: np.ndarray  # NaN where masked
    mask: np.ndarray


def load_dataset(spec: DatasetSpec, keep_largest_fragment: bool = True) -> list[Record]:
    """One record per readable row; blank target cells become masked entries.

    ``index`` is the 0-based data-row number in the file, so dropped rows
    leave gaps rather than renumbering the survivors.
    """
    with open(spec.csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in [spec.smiles_column, *spec.target_columns]:
            if col not in header:
                raise MissingColumn(f"column {col!r} not in {spec.csv_path} (have {header})")
        rows = list(reader)
    records, dropped = [], 0
    for i, row in enumerate(rows):
        smi = (row[spec.smiles_column] or "").strip()
        try:
            featurize(read_smiles(smi, keep_largest_fragment=keep_largest_fragment))
        except FunQGError as exc:
            dropped += 1
            log.debug("row %d dropped: %s", i, exc)
            continue
        cells = [(row[c] or "").strip() for c in spec.target_columns]
        mask = np.array([c != "" for c in cells], dtype=bool)
        targets = np.array([float(c) if c != "" else np.nan for c in cells])
        records.append(Record(i, smi, targets, mask))
    if dropped:
        log.warning("dropped %d of %d rows with unreadable SMILES", dropped, len(rows))
    if not records:
        raise EmptyDataset(f"no usable rows in {spec.csv_path}")
    load_dataset.last_dropped = dropped
    return records


load_dataset.last_dropped = 0


# --------------------------------------------------------------------------- graph cache


@dataclass
class CacheEntry:
    index: int
    smiles: str
    graph: MolGraph
    targets: np.ndarray
    mask: np.ndarray
    scaffold_key: ScaffoldKey
    num_atoms: int


@dataclass
class GraphCache:
    manifest: dict
    entries: list[CacheEntry]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def task_type(self) -> str:
        return self.manifest["task_type"]

    @property
    def num_tasks(self) -> int:
        return len(self.manifest["targets"])

    def targets(self, positions: Sequence[int] | None = None) -> tuple[np.ndarray, np.ndarray]:
        rows = self.entries if positions is None else [self.entries[p] for p in positions]
        return np.array([e.targets for e in rows]).reshape(-1, self.num_tasks), np.array(
            [e.mask for e in rows], dtype=bool
        ).reshape(-1, self.num_tasks)

    def graphs(self, positions: Sequence[int]) -> list[MolGraph]:
        return [self.entries[p].graph for p in positions]

    def abstraction_ratio(self) -> float:
        atoms = sum(e.num_atoms for e in self.entries)
        if atoms == 0:
            raise EmptyDataset("cache holds no molecules")
        return sum(e.graph.num_nodes for e in self.entries) / atoms

    def check(self, n_i: int | None = None, e_i: int | None = None, coarsen: bool | None = None) -> None:
        for key, want in (("n_i", n_i), ("e_i", e_i), ("coarsen", coarsen)):
            if want is not None and self.manifest[key] != want:
                raise ManifestMismatch(f"cache {key}={self.manifest[key]!r}, expected {want!r}")


def _graph_record(args) -> dict | None:
    rec, coarsen, keep_largest = args
    try:
        m = read_smiles(rec.smiles, keep_largest_fragment=keep_largest)
        g = featurize(m)
        q = funqg(m, g) if coarsen else g
        key = murcko_scaffold(m)
    except FunQGError as exc:
        log.warning("molecule %d (%s) skipped: %s", rec.index, rec.smiles, exc)
        return None
    return {
        "index": rec.index,
        "smiles": rec.smiles,
        "num_atoms": g.num_nodes,
        "node_features": q.node_features.tolist(),
        "edges": np.asarray(q.edges, dtype=np.int64).reshape(-1, 2).tolist(),
        "edge_features": np.asarray(q.edge_features).reshape(-1, EDGE_DIM).tolist(),
        "targets": [None if not m_ else float(t) for t, m_ in zip(rec.targets, rec.mask)],
        "mask": [int(x) for x in rec.mask],
        "scaffold_key": key.hex(),
    }


def build_cache(
    records: Sequence[Record],
    path,
    coarsen: bool = True,
    task_type: str = "classification",
    target_names: Sequence[str] | None = None,
    keep_largest_fragment: bool = True,
    workers: int | None = None,
) -> GraphCache:
    """Featurize (and optionally coarsen) every record and write the cache file.

    Work is spread over ``workers`` processes (``FUNQG_WORKERS`` by default);
    results are collected in input order, so the file does not depend on it.
    """
    if not records:
        raise EmptyDataset("no records to cache")
    if target_names is None:
        target_names = [f"task{t}" for t in range(len(records[0].targets))]
    workers = num_workers() if workers is None else max(1, workers)
    jobs = [(r, coarsen, keep_largest_fragment) for r in records]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            out = list(pool.map(_graph_record, jobs, chunksize=64))
    else:
        out = [_graph_record(j) for j in jobs]
    out = [o for o in out if o is not None]
    if not out:
        raise EmptyDataset("every molecule failed to featurize")
    manifest = {
        "format": CACHE_FORMAT,
        "version": FORMAT_VERSION,
        "tool_version": __version__,
        "n_i": NODE_DIM,
        "e_i": EDGE_DIM,
        "coarsen": bool(coarsen),
        "task_type": task_type,
        "targets": list(target_names),
        "count": len(out),
    }
    with open(path, "w") as fh:
        fh.write(_dumps(manifest) + "\n")
        for o in out:
            fh.write(_dumps(o) + "\n")
    return load_cache(path)


def load_cache(path) -> GraphCache:
    with open(path) as fh:
        first = fh.readline()
        if not first:
            raise EmptyDataset(f"{path} is empty")
        manifest = json.loads(first)
        if manifest.get("format") != CACHE_FORMAT or manifest.get("version") != FORMAT_VERSION:
            raise ManifestMismatch(f"{path} is not a version-{FORMAT_VERSION} graph cache")
        entries = []
        for line in fh:
            o = json.loads(line)
            nf = np.asarray(o["node_features"], dtype=np.float64).reshape(-1, manifest["n_i"])
            ef = np.asarray(o["edge_features"], dtype=np.float64).reshape(-1, manifest["e_i"])
            edges = np.asarray(o["edges"], dtype=np.int64).reshape(-1, 2)
            targets = np.array([np.nan if t is None else t for t in o["targets"]], dtype=np.float64)
            entries.append(
                CacheEntry(
                    o["index"],
                    o["smiles"],
                    MolGraph(nf, edges, ef),
                    targets,
                    np.asarray(o["mask"], dtype=bool),
                    ScaffoldKey.from_hex(o["scaffold_key"]),
                    o["num_atoms"],
                )
            )
    if len(entries) != manifest["count"]:
        raise ManifestMismatch(f"{path}: manifest says {manifest['count']} records, found {len(entries)}")
    return GraphCache(manifest, entries)


# --------------------------------------------------------------------------- splits


def split_cache(cache: GraphCache, seed: int, ratios=(0.8, 0.1, 0.1)) -> SplitAssignment:
    """Scaffold split over cache positions (not dataset row indices)."""
    return scaffold_split([e.scaffold_key for e in cache.entries], seed, ratios)


def write_split(path, cache: GraphCache, split: SplitAssignment) -> None:
    part = split.partition_of()
    header = {"format": SPLIT_FORMAT, "version": FORMAT_VERSION, "seed": split.seed, "ratios": list(split.ratios)}
    with open(path, "w") as fh:
        fh.write(_dumps(header) + "\n")
        for pos, e in enumerate(cache.entries):
            fh.write(
                _dumps({"index": e.index, "smiles": e.smiles, "partition": part[pos], "scaffold_key_hex": e.scaffold_key.hex()})
                + "\n"
            )


def read_split(path, cache: GraphCache) -> SplitAssignment:
    """Load a split file, checking it lines up with ``cache`` record by record."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("format") != SPLIT_FORMAT:
            raise ManifestMismatch(f"{path} is not a split file")
        rows = [json.loads(line) for line in fh]
    if len(rows) != len(cache):
        raise ManifestMismatch(f"split has {len(rows)} rows, cache has {len(cache)}")
    parts: dict[str, list[int]] = {"train": [], "valid": [], "test": []}
    for pos, (row, e) in enumerate(zip(rows, cache.entries)):
        if row["index"] != e.index or row["smiles"] != e.smiles:
            raise ManifestMismatch(f"split row {pos} ({row['index']}) does not match cache record {e.index}")
        parts[row["partition"]].append(pos)
    return SplitAssignment(parts["train"], parts["valid"], parts["test"], header["seed"], tuple(header["ratios"]))


# --------------------------------------------------------------------------- run config


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_norm: float | None = 3.0  # None means uncapped
    batch_size: int = 50
    max_epochs: int = 150
    patience: int = 30
    split_seeds: list[int] = field(default_factory=lambda: [0, 1, 2])
    seed: int = 0
    coarsen: bool = True

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_norm is not None:
            if math.isinf(self.max_norm):
                self.max_norm = None
            elif self.max_norm <= 0:
                raise ValueError("max_norm must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        return hashlib.sha256(_dumps(self.to_dict()).encode()).hexdigest()[:16]


# --------------------------------------------------------------------------- training


@dataclass
class TrainResult:
    store: ParamStore
    log: list[dict]
    best_epoch: int
    best_metric: float
    target_mean: list[float] | None = None
    target_std: list[float] | None = None

    def checkpoint(self, run: RunConfig, cache: GraphCache, split: SplitAssignment) -> dict:
        data = params_to_dict(self.store)
        data.update(
            run=run.to_dict(),
            n_i=cache.manifest["n_i"],
            e_i=cache.manifest["e_i"],
            coarsen=cache.manifest["coarsen"],
            task_type=cache.task_type,
            split_seed=split.seed,
            target_mean=self.target_mean,
            target_std=self.target_std,
            best_epoch=self.best_epoch,
            tool_version=__version__,
        )
        return data


def _higher_is_better(task_type: str) -> bool:
    return task_type == "classification"


def _score(task_type: str, pred: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    if task_type == "classification":
        return multitask_roc_auc(pred, y, mask)
    return multitask_rmse(pred, y, mask)


def _predict(graphs: list[MolGraph], store: ParamStore, cfg: ModelConfig, batch_size: int, mean=None, std=None) -> np.ndarray:
    out = []
    for i in range(0, len(graphs), batch_size):
        out.append(forward(GraphBatch(graphs[i : i + batch_size]), store, cfg).value)
    pred = np.concatenate(out)
    if mean is not None:
        pred = pred * np.asarray(std) + np.asarray(mean)
    return pred


def train(cache: GraphCache, split: SplitAssignment, run: RunConfig) -> TrainResult:
    """Adam with max-norm and early stopping on the validation metric.

    Regression targets are standardized with train-partition statistics for
    the loss; predictions and metrics are always in the original units.
    """
    cache.check(n_i=run.model.n_i, e_i=run.model.e_i, coarsen=run.coarsen)
    if not split.train or not split.valid:
        raise DegenerateSplit("training needs nonempty train and valid partitions")
    cfg = replace(run.model, out_dim=cache.num_tasks)
    task = cache.task_type
    y_train, m_train = cache.targets(split.train)
    mean = std = None
    if task == "regression":
        mean, std = [], []
        for t in range(cache.num_tasks):
            col = y_train[m_train[:, t], t]
            if col.size == 0:
                raise AllMasked(f"task {t} has no labelled training rows")
            mean.append(float(col.mean()))
            s = float(col.std())
            std.append(s if s > 0 else 1.0)
        y_fit = np.where(m_train, (y_train - np.asarray(mean)) / np.asarray(std), 0.0)
    else:
        y_fit = np.where(m_train, y_train, 0.0)
    y_valid, m_valid = cache.targets(split.valid)
    g_train = cache.graphs(split.train)
    g_valid = cache.graphs(split.valid)

    store = init_params(cfg, seed=run.seed)
    rng = np.random.default_rng(run.seed)
    better = _higher_is_better(task)
    best, best_epoch, best_store, bad = None, 0, store.copy(), 0
    history = []
    for epoch in range(1, run.max_epochs + 1):
        order = rng.permutation(len(g_train))
        losses = []
        for b, i in enumerate(range(0, len(order), run.batch_size)):
            pick = order[i : i + run.batch_size]
            try:
                leaves = store.leaves()
                out = forward(GraphBatch([g_train[j] for j in pick]), leaves, cfg, training=True, rng=rng)
                if task == "classification":
                    loss = ad.masked_bce(out, y_fit[pick], m_train[pick])
                else:
                    loss = ad.mse(out, y_fit[pick], m_train[pick])
            except NonFiniteValue as exc:
                raise NonFiniteLoss(f"non-finite value at epoch {epoch}, batch {b}: {exc}") from exc
            except AllMasked:
                continue
            ad.backward(loss)
            store.accumulate(leaves)
            adam_step(store, run.lr, run.beta1, run.beta2, run.eps)
            if run.max_norm is not None:
                max_norm(store, run.max_norm)
            losses.append(loss.item())
        for name, p in store.items():
            if not np.isfinite(p).all():
                raise NonFiniteLoss(f"parameter {name} became non-finite at epoch {epoch}")
        try:
            pred = _predict(g_valid, store, cfg, max(run.batch_size, 256), mean, std)
        except NonFiniteValue as exc:
            raise NonFiniteLoss(f"non-finite validation output at epoch {epoch}: {exc}") from exc
        metric = _score(task, pred, y_valid, m_valid)
        history.append({"epoch": epoch, "loss": float(np.mean(losses)) if losses else None, "valid": metric})
        improved = best is None or (metric > best if better else metric < best)
        if improved:
            best, best_epoch, best_store, bad = metric, epoch, store.copy(), 0
        else:
            bad += 1
            if bad >= run.patience:
                break
    return TrainResult(best_store, history, best_epoch, best, mean, std)


# --------------------------------------------------------------------------- evaluation


def evaluate(
    cache: GraphCache,
    split: SplitAssignment,
    checkpoint: dict,
    partition: str = "test",
) -> dict:
    """Score a checkpoint on one partition (the test partition by default)."""
    for key in ("n_i", "e_i", "coarsen"):
        if checkpoint[key] != cache.manifest[key]:
            raise ShapeMismatch(f"checkpoint {key}={checkpoint[key]!r} but cache has {cache.manifest[key]!r}")
    run = RunConfig.from_dict(checkpoint["run"])
    cfg = replace(run.model, out_dim=cache.num_tasks)
    store = params_from_dict(checkpoint)
    positions = getattr(split, partition)
    if not positions:
        raise DegenerateSplit(f"{partition} partition is empty")
    y, m = cache.targets(positions)
    pred = _predict(cache.graphs(positions), store, cfg, 256, checkpoint.get("target_mean"), checkpoint.get("target_std"))
    metric_name = "roc_auc" if cache.task_type == "classification" else "rmse"
    indices = [cache.entries[p].index for p in positions]
    return {
        "metric": metric_name,
        "value": _score(cache.task_type, pred, y, m),
        "partition": partition,
        "n": len(positions),
        "partition_digest": hashlib.sha256(_dumps(indices).encode()).hexdigest()[:16],
        "split_seed": split.seed,
        "seed": run.seed,
        "config_digest": run.digest(),
        "tool_version": __version__,
    }


def constant_baseline(cache: GraphCache, split: SplitAssignment, partition: str = "test") -> float:
    """Test metric of predicting the per-task train mean for every molecule."""
    y_train, m_train = cache.targets(split.train)
    means = np.array([y_train[m_train[:, t], t].mean() for t in range(cache.num_tasks)])
    y, m = cache.targets(getattr(split, partition))
    pred = np.tile(means, (len(y), 1))
    return _score(cache.task_type, pred, y, m)


def format_mean_std(values: Sequence[float], digits: int = 3) -> str:
    """``0.845(0.008)``: mean with population standard deviation in brackets."""
    values = np.asarray(values, dtype=np.float64)
    return f"{values.mean():.{digits}f}({values.std():.{digits}f})"


def run_protocol(cache: GraphCache, run: RunConfig, seeds: Sequence[int] | None = None) -> dict:
    """Split, train and test once per seed; summarize as mean(std)."""
    seeds = list(run.split_seeds if seeds is None else seeds)
    per_seed = []
    for s in seeds:
        split = split_cache(cache, s)
        result = train(cache, split, run)
        report = evaluate(cache, split, result.checkpoint(run, cache, split))
        report["baseline"] = constant_baseline(cache, split)
        report["best_epoch"] = result.best_epoch
        per_seed.append(report)
    values = [r["value"] for r in per_seed]
    return {
        "metric": per_seed[0]["metric"],
        "mean": float(np.mean(values)),
        "std": float(np.std(values)),
        "summary": format_mean_std(values),
        "baseline_mean": float(np.mean([r["baseline"] for r in per_seed])),
        "seeds": seeds,
        "per_seed": per_seed,
        "config_digest": run.digest(),
        "run": run.to_dict(),
        "tool_version": __version__,
    }


# --------------------------------------------------------------------------- random search


def default_search_space(coarsen: bool = True) -> dict:
    """Sampling ranges.  Lists are uniform choices; dicts name a distribution."""
    return {
        "hidden": {"int_uniform": [64, 300]},
        "steps": [2, 3, 4] if coarsen else [3, 4, 5, 6],
        "lr": {"log_uniform": [1e-4, 1e-2]},
        "dropout": [0.0, 0.1, 0.2, 0.4],
        "ffn_hidden": {"int_uniform": [64, 300]},
        "batch_size": [32, 50, 64, 128],
        "max_norm": [2.0, 3.0, None],
    }


def _sample(spec, rng: np.random.Generator):
    if isinstance(spec, dict):
        (kind, (lo, hi)), = spec.items()
        if kind == "int_uniform":
            return int(rng.integers(lo, hi + 1))
        if kind == "log_uniform":
            return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        if kind == "uniform":
            return float(rng.uniform(lo, hi))
        raise ValueError(f"unknown distribution {kind!r}")
    return spec[int(rng.integers(len(spec)))]


MODEL_KEYS = ("hidden", "steps", "dropout", "ffn_hidden", "architecture", "readout")


def sample_configs(base: RunConfig, space: dict, budget: int, seed: int) -> list[RunConfig]:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(budget):
        model_kw, run_kw = {}, {}
        for name in sorted(space):
            value = _sample(space[name], rng)
            (model_kw if name in MODEL_KEYS else run_kw)[name] = value
        out.append(replace(base, model=replace(base.model, **model_kw), **run_kw))
    return out


def _trial(args) -> tuple[float | None, int, str]:
    cache, split, run = args
    try:
        result = train(cache, split, run)
    except NonFiniteLoss as exc:
        return None, 0, str(exc)
    return result.best_metric, result.best_epoch, ""


def hyper_search(
    cache: GraphCache,
    base: RunConfig,
    space: dict | None = None,
    budget: int = 20,
    seed: int = 0,
    split_seed: int = 1,
    workers: int | None = None,
) -> tuple[RunConfig, list[dict]]:
    """Seeded random search scored on the validation partition of one split.

    Configurations are drawn up front, so running trials in parallel cannot
    change which configuration wins.  A trial that diverges scores worst;
    ties go to the earlier trial.
    """
    space = default_search_space(base.coarsen) if space is None else space
    configs = sample_configs(base, space, budget, seed)
    split = split_cache(cache, split_seed)
    workers = num_workers() if workers is None else max(1, workers)
    jobs = [(cache, split, c) for c in configs]
    if workers > 1 and budget > 1:
        with ProcessPoolExecutor(min(workers, budget)) as pool:
            results = list(pool.map(_trial, jobs))
    else:
        results = [_trial(j) for j in jobs]
    better = _higher_is_better(cache.task_type)
    trials, best_i = [], None
    for i, (c, (metric, epoch, err)) in enumerate(zip(configs, results)):
        trials.append({"trial": i, "valid": metric, "best_epoch": epoch, "diverged": metric is None, "error": err, "run": c.to_dict()})
        if metric is None:
            continue
        if best_i is None or (metric > results[best_i][0] if better else metric < results[best_i][0]):
            best_i = i
    if best_i is None:
        raise NonFiniteLoss("every trial diverged")
    return configs[best_i], trials

