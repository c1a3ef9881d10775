"""Parameter storage, Adam, max-norm and parameter checkpoints."""

from __future__ import annotations

import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

from funqg.autodiff import Tensor
from funqg.errors import ShapeMismatch

CHECKPOINT_FORMAT = "funqg-params"
CHECKPOINT_VERSION = 1


class ParamStore:
    """Named parameter arrays with gradient buffers and Adam moments.

    Weight matrices are 2-D; biases are 1-D and are exempt from max-norm.
    """

    def __init__(self):
        self.params: OrderedDict[str, np.ndarray] = OrderedDict()
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value) -> None:
        value = np.array(value, dtype=np.float64)
        if name in self.params:
            raise KeyError(f"parameter {name!r} already exists")
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params)

    def items(self):
        return self.params.items()

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def leaves(self) -> dict[str, Tensor]:
        """Fresh leaf tensors over the current values, for one forward pass."""
        return {name: Tensor(p if p.ndim == 2 else p.reshape(1, -1), requires_grad=True) for name, p in self.params.items()}

    def accumulate(self, leaves: dict[str, Tensor]) -> None:
        for name, t in leaves.items():
            if t.grad is not None:
                self.grads[name] += t.grad.reshape(self.params[name].shape)

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for name, p in self.params.items():
            out.add(name, p)
            out.m[name][...] = self.m[name]
            out.v[name][...] = self.v[name]
        out.step = self.step
        return out

    def values_equal(self, other: "ParamStore") -> bool:
        return list(self.params) == list(other.params) and all(
            np.array_equal(self.params[k], other.params[k]) for k in self.params
        )


def adam_step(store: ParamStore, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> ParamStore:
    """One bias-corrected Adam update in place; gradients are cleared afterwards."""
    store.step += 1
    t = store.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, p in store.params.items():
        g = store.grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    store.zero_grad()
    return store


def max_norm(store: ParamStore, c: float) -> ParamStore:
    """Rescale every weight-matrix row whose Euclidean norm exceeds ``c`` to norm ``c``."""
    if not c > 0:
        raise ValueError(f"max-norm cap must be positive, got {c}")
    if np.isinf(c):
        return store
    for p in store.params.values():
        if p.ndim != 2:
            continue
        norms = np.linalg.norm(p, axis=1)
        over = norms > c
        if over.any():
            p[over] *= (c / norms[over])[:, None]
    return store


# --------------------------------------------------------------------------- checkpoints


def params_to_dict(store: ParamStore) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "params": [
            {"name": name, "shape": list(p.shape), "values": p.ravel().tolist()} for name, p in store.params.items()
        ],
    }


def params_from_dict(data: dict) -> ParamStore:
    if data.get("format") != CHECKPOINT_FORMAT:
        raise ShapeMismatch(f"not a parameter container: format={data.get('format')!r}")
    if data.get("version") != CHECKPOINT_VERSION:
        raise ShapeMismatch(f"unsupported parameter container version {data.get('version')!r}")
    store = ParamStore()
    for entry in data["params"]:
        values = np.asarray(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if values.size != int(np.prod(shape)):
            raise ShapeMismatch(f"{entry['name']}: {values.size} values for shape {shape}")
        store.add(entry["name"], values.reshape(shape))
    return store


def save_checkpoint(path, store: ParamStore, **extra) -> None:
    """Write parameters (plus any JSON-compatible ``extra`` fields) as JSON."""
    data = params_to_dict(store)
    data.update(extra)
    Path(path).write_text(json.dumps(data, sort_keys=True) + "\n")


def load_checkpoint(path) -> tuple[ParamStore, dict]:
    data = json.loads(Path(path).read_text())
    store = params_from_dict(data)
    extra = {k: v for k, v in data.items() if k not in ("format", "version", "params")}
    return store, extra
