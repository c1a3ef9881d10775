"""Reverse-mode differentiation over a fixed set of dense operations.

Every value is a 2-D float64 array wrapped in a :class:`Tensor`.  Each op
computes its forward value eagerly and records a closure that maps the
output gradient to input gradients; :func:`backward` replays those closures
in reverse topological order.  Only the operations defined here are
differentiable.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from funqg.errors import AllMasked, EmptyGraph, NonFiniteValue, ShapeMismatch


class Tensor:
    __slots__ = ("value", "grad", "parents", "backward_fn", "requires_grad", "op")

    def __init__(self, value, requires_grad: bool = False, parents=(), backward_fn=None, op: str = "leaf"):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 1:
            value = value.reshape(1, -1)
        if value.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {value.shape}")
        if not np.isfinite(value).all():
            raise NonFiniteValue(f"non-finite value produced by {op}")
        self.value = value
        self.grad: np.ndarray | None = None
        self.parents: tuple[Tensor, ...] = tuple(parents)
        self.backward_fn: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.op = op

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op})"

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeMismatch("item() needs a 1x1 tensor")
        return float(self.value[0, 0])


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, parents, backward_fn, op) -> Tensor:
    return Tensor(value, parents=parents, backward_fn=backward_fn, op=op)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor that requires it."""
    if loss.value.size != 1:
        raise ShapeMismatch("backward() needs a scalar loss")
    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        t, done = stack.pop()
        if done:
            order.append(t)
            continue
        if id(t) in seen or not t.requires_grad:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for p in t.parents:
            if id(p) not in seen:
                stack.append((p, False))
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    for t in reversed(order):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        if t.backward_fn is None:
            t.grad = g if t.grad is None else t.grad + g
            continue
        for p, pg in zip(t.parents, t.backward_fn(g)):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            grads[key] = pg if key not in grads else grads[key] + pg


# --------------------------------------------------------------------------- ops


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return _node(np.einsum("ij,jk->ik", av, bv), (a, b), lambda g: (g @ bv.T, av.T @ g), "matmul")


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T (+ bias)``; ``weight`` is (out, in), matching the model's W matrices."""
    x, weight = _as_tensor(x), _as_tensor(weight)
    if x.shape[1] != weight.shape[1]:
        raise ShapeMismatch(f"linear input width {x.shape[1]} vs weight {weight.shape}")
    xv, wv = x.value, weight.value
    # einsum's row-by-row loop keeps each output row independent of how many
    # rows share the call, so batched and unbatched forwards agree bitwise
    out = np.einsum("ij,kj->ik", xv, wv)
    if bias is None:
        return _node(out, (x, weight), lambda g: (g @ wv, g.T @ xv), "linear")
    bias = _as_tensor(bias)
    if bias.shape != (1, weight.shape[0]):
        raise ShapeMismatch(f"bias {bias.shape} vs weight {weight.shape}")
    return _node(
        out + bias.value,
        (x, weight, bias),
        lambda g: (g @ wv, g.T @ xv, g.sum(axis=0, keepdims=True)),
        "linear",
    )


def add(a, b) -> Tensor:
    """Elementwise sum; ``b`` may also be a single row broadcast over ``a``."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        return _node(a.value + b.value, (a, b), lambda g: (g, g), "add")
    if b.shape == (1, a.shape[1]):
        return _node(a.value + b.value, (a, b), lambda g: (g, g.sum(axis=0, keepdims=True)), "add")
    raise ShapeMismatch(f"add {a.shape} + {b.shape}")


def relu(x) -> Tensor:
    x = _as_tensor(x)
    mask = x.value > 0
    return _node(np.where(mask, x.value, 0.0), (x,), lambda g: (g * mask,), "relu")


def concat_cols(parts: Sequence) -> Tensor:
    parts = [_as_tensor(p) for p in parts]
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeMismatch(f"concat_cols row counts differ: {[p.shape for p in parts]}")
    widths = np.cumsum([0] + [p.shape[1] for p in parts])

    def back(g):
        return [g[:, widths[i] : widths[i + 1]] for i in range(len(parts))]

    return _node(np.concatenate([p.value for p in parts], axis=1), parts, back, "concat_cols")


def _check_ids(ids, n_rows: int, num_segments: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != (n_rows,):
        raise ShapeMismatch(f"segment ids shape {ids.shape} vs {n_rows} rows")
    if n_rows and (ids.min() < 0 or ids.max() >= num_segments):
        raise ShapeMismatch("segment id out of range")
    return ids


def segment_sum(x, segment_ids, num_segments: int) -> Tensor:
    """Row ``s`` of the result sums the rows of ``x`` whose id is ``s``."""
    x = _as_tensor(x)
    ids = _check_ids(segment_ids, x.shape[0], num_segments)
    out = np.zeros((num_segments, x.shape[1]))
    np.add.at(out, ids, x.value)
    return _node(out, (x,), lambda g: (g[ids],), "segment_sum")


def segment_mean(x, segment_ids, num_segments: int) -> Tensor:
    x = _as_tensor(x)
    ids = _check_ids(segment_ids, x.shape[0], num_segments)
    counts = np.bincount(ids, minlength=num_segments).astype(np.float64)
    if (counts == 0).any():
        raise EmptyGraph(f"segment {int(np.argmin(counts))} has no rows")
    out = np.zeros((num_segments, x.shape[1]))
    np.add.at(out, ids, x.value)
    out /= counts[:, None]
    return _node(out, (x,), lambda g: ((g / counts[:, None])[ids],), "segment_mean")


def row_select(x, index) -> Tensor:
    """Gather rows ``x[index]``; repeated indices accumulate in the gradient."""
    x = _as_tensor(x)
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1 or (idx.size and (idx.min() < 0 or idx.max() >= x.shape[0])):
        raise ShapeMismatch("row_select index out of range")
    n = x.shape[0]

    def back(g):
        out = np.zeros((n, g.shape[1]))
        np.add.at(out, idx, g)
        return (out,)

    return _node(x.value[idx], (x,), back, "row_select")


def dropout(x, p: float, rng: np.random.Generator | None, training: bool = True) -> Tensor:
    """Zero entries with probability ``p`` and rescale survivors by 1/(1-p)."""
    x = _as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    scale = (rng.random(x.shape) >= p) / (1.0 - p)
    return _node(x.value * scale, (x,), lambda g: (g * scale,), "dropout")


def masked_bce(logits, targets, mask) -> Tensor:
    """Mean binary cross-entropy with logits over entries where ``mask`` is 1."""
    logits = _as_tensor(logits)
    y = np.asarray(targets, dtype=np.float64).reshape(logits.shape)
    w = np.asarray(mask, dtype=np.float64).reshape(logits.shape)
    count = w.sum()
    if count == 0:
        raise AllMasked("every entry is masked")
    z = logits.value
    y = np.where(w > 0, y, 0.0)  # masked cells may hold NaN placeholders
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    loss = float((per * w).sum() / count)

    def back(g):
        sig = 0.5 * (1.0 + np.tanh(0.5 * z))
        return ((sig - y) * w * (g[0, 0] / count),)

    return _node([[loss]], (logits,), back, "masked_bce")


def mse(pred, target, mask=None) -> Tensor:
    """Mean squared error over unmasked entries."""
    pred = _as_tensor(pred)
    t = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    w = np.ones(pred.shape) if mask is None else np.asarray(mask, dtype=np.float64).reshape(pred.shape)
    count = w.sum()
    if count == 0:
        raise AllMasked("every entry is masked")
    t = np.where(w > 0, t, 0.0)
    diff = (pred.value - t) * w
    loss = float((diff * diff).sum() / count)
    return _node([[loss]], (pred,), lambda g: (2.0 * diff * (g[0, 0] / count),), "mse")


# --------------------------------------------------------------------------- checking


def numerical_gradient(f: Callable[[], float], array: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of ``f`` with respect to ``array`` (modified in place)."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = array[i]
        array[i] = orig + step
        fp = f()
        array[i] = orig - step
        fm = f()
        array[i] = orig
        grad[i] = (fp - fm) / (2 * step)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """max |a - n| / max(|a| + |n|, floor) over all entries."""
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), floor)
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / denom))
