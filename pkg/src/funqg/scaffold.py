"""Bemis-Murcko scaffold keys and balanced scaffold splits."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from funqg.errors import DegenerateSplit
from funqg.smiles import DOUBLE, Molecule


@dataclass(frozen=True, order=True)
class ScaffoldKey:
    digest: int

    def hex(self) -> str:
        return f"{self.digest:016x}"

    @property
    def is_empty(self) -> bool:
        return self.digest == 0

    @classmethod
    def from_hex(cls, text: str) -> "ScaffoldKey":
        return cls(int(text, 16))


EMPTY = ScaffoldKey(0)


def scaffold_atoms(m: Molecule) -> set[int]:
    """Ring and linker atoms plus atoms double-bonded to them.

    Terminal atoms are stripped until none remain; what survives is the ring
    systems and the chains joining them.  Atoms doubly bonded to a surviving
    atom (exocyclic ``=O`` and the like) are then put back.
    """
    adj = m.adjacency()
    alive = set(range(m.num_atoms))
    degree = [len(adj[i]) for i in range(m.num_atoms)]
    frontier = [i for i in alive if degree[i] <= 1]
    while frontier:
        nxt = []
        for v in frontier:
            if v not in alive:
                continue
            alive.discard(v)
            for w, _ in adj[v]:
                if w in alive:
                    degree[w] -= 1
                    if degree[w] <= 1:
                        nxt.append(w)
        frontier = nxt
    if not alive:
        return set()
    extra = {w for v in alive for w, k in adj[v] if w not in alive and m.bonds[k].order == DOUBLE}
    return alive | extra


def _digest(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "big")


def murcko_scaffold(m: Molecule) -> ScaffoldKey:
    """64-bit key of the scaffold, invariant under atom relabelling.

    Atom labels (element, aromaticity) are refined by neighbourhood
    multisets (bond order, neighbour label) until the partition they induce
    stops splitting; the sorted final labels are hashed.  Chirality is
    ignored.  Ring-free molecules map to :data:`EMPTY`.
    """
    keep = scaffold_atoms(m)
    if not keep:
        return EMPTY
    adj = m.adjacency()
    labels = {v: f"{m.atoms[v].element}{'a' if m.atoms[v].aromatic else ''}" for v in keep}
    n_classes = len(set(labels.values()))
    for _ in range(len(keep)):
        new = {}
        for v in keep:
            nb = sorted(f"{m.bonds[k].order}>{labels[w]}" for w, k in adj[v] if w in keep)
            new[v] = format(_digest(labels[v] + "|" + ",".join(nb)), "x")
        labels = new
        count = len(set(labels.values()))
        if count == n_classes:
            break
        n_classes = count
    key = _digest(f"{len(keep)}:" + ",".join(sorted(labels.values())))
    return ScaffoldKey(key or 1)


@dataclass
class SplitAssignment:
    train: list[int]
    valid: list[int]
    test: list[int]
    seed: int
    ratios: tuple[float, float, float]

    def partition_of(self) -> dict[int, str]:
        out = {}
        for name in ("train", "valid", "test"):
            for i in getattr(self, name):
                out[i] = name
        return out


def scaffold_split(
    keys: list[ScaffoldKey], seed: int, ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
) -> SplitAssignment:
    """Assign whole scaffold groups to train/valid/test.

    Groups bigger than half the validation budget are placed first (largest
    first); the rest are shuffled with ``seed``.  Walking that order, a group
    goes to train if it still fits the train budget, else to valid if it fits
    there, else to test.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or min(ratios) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(keys)
    groups: dict[ScaffoldKey, list[int]] = {}
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    train_budget = ratios[0] * n + 1e-9
    valid_budget = ratios[1] * n + 1e-9

    all_groups = list(groups.values())  # insertion order: first occurrence
    big = [g for g in all_groups if len(g) > valid_budget / 2]
    small = [g for g in all_groups if len(g) <= valid_budget / 2]
    big.sort(key=lambda g: (-len(g), g[0]))
    rng = np.random.default_rng(seed)
    order = big + [small[j] for j in rng.permutation(len(small))]

    train, valid, test = [], [], []
    for g in order:
        if len(train) + len(g) <= train_budget:
            train.extend(g)
        elif len(valid) + len(g) <= valid_budget:
            valid.extend(g)
        else:
            test.extend(g)
    for name, part in (("train", train), ("valid", valid), ("test", test)):
        if not part:
            raise DegenerateSplit(f"{name} partition would be empty ({len(groups)} scaffold groups, {n} molecules)")
    return SplitAssignment(sorted(train), sorted(valid), sorted(test), seed, ratios)
