"""Functional-group quotient graphs.

A molecule is coarsened in three steps: cut every bond that touches a
functional group without lying inside it, take the connected components of
what remains as a node partition, and contract each block to one node.
Feature aggregation is done in two stages: carbon-only blocks are contracted
with the mean, then functional groups with the sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from funqg.errors import EmptyDataset, FGNotComponent, OverlappingFGs
from funqg.featurizer import MolGraph, featurize
from funqg.functional_groups import FunctionalGroup, functional_groups
from funqg.smiles import Molecule

FG, NON_FG = "fg", "non-fg"


@dataclass
class PartitionSet:
    blocks: list[tuple[int, ...]]
    kinds: list[str]

    def __len__(self) -> int:
        return len(self.blocks)

    def block_of(self) -> dict[int, int]:
        return {v: b for b, block in enumerate(self.blocks) for v in block}


@dataclass
class QuotientGraph(MolGraph):
    """A :class:`MolGraph` whose nodes and edges remember what they contract.

    ``node_blocks[q]`` lists the original nodes merged into node ``q`` and
    ``edge_sources[k]`` the original edge indices merged into edge ``k``.
    """

    node_blocks: list[tuple[int, ...]] = field(default_factory=list)
    edge_sources: list[tuple[int, ...]] = field(default_factory=list)


def _agg(name: str) -> Callable[[np.ndarray], np.ndarray]:
    if name == "sum":
        return lambda rows: rows.sum(axis=0)
    if name == "mean":
        return lambda rows: rows.mean(axis=0)
    raise ValueError(f"unknown aggregation {name!r}; expected 'sum' or 'mean'")


def _fg_owner(num_nodes: int, fgs: Sequence[FunctionalGroup]) -> list[int]:
    owner = [-1] * num_nodes
    for k, fg in enumerate(fgs):
        for v in fg.atom_indices:
            if not 0 <= v < num_nodes:
                raise IndexError(f"functional group atom {v} out of range")
            if owner[v] >= 0:
                raise OverlappingFGs(f"atom {v} belongs to groups {owner[v]} and {k}")
            owner[v] = k
    return owner


def compute_cut_edges(g: MolGraph, fgs: Sequence[FunctionalGroup]) -> frozenset[int]:
    """Indices of edges with an endpoint in a group whose endpoints share no group."""
    owner = _fg_owner(g.num_nodes, fgs)
    cut = set()
    for k, (v, w) in enumerate(g.edges.tolist()):
        if (owner[v] >= 0 or owner[w] >= 0) and owner[v] != owner[w]:
            cut.add(k)
    return frozenset(cut)


def _components(num_nodes: int, edges: Iterable[tuple[int, int]]) -> list[tuple[int, ...]]:
    parent = list(range(num_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v, w in edges:
        rv, rw = find(v), find(w)
        if rv != rw:
            parent[max(rv, rw)] = min(rv, rw)
    groups: dict[int, list[int]] = {}
    for v in range(num_nodes):
        groups.setdefault(find(v), []).append(v)
    return sorted((tuple(b) for b in groups.values()), key=lambda b: b[0])


def components_partition(g: MolGraph, cut: Iterable[int], fgs: Sequence[FunctionalGroup]) -> PartitionSet:
    """Connected components of ``g`` minus the cut edges, tagged FG / non-FG."""
    cut = set(cut)
    kept = [tuple(e) for k, e in enumerate(g.edges.tolist()) if k not in cut]
    blocks = _components(g.num_nodes, kept)
    fg_sets = {fg.atom_indices: k for k, fg in enumerate(fgs)}
    kinds = []
    seen = set()
    for block in blocks:
        k = fg_sets.get(frozenset(block))
        if k is not None:
            kinds.append(FG)
            seen.add(k)
        else:
            kinds.append(NON_FG)
    for k, fg in enumerate(fgs):
        if k not in seen:
            raise FGNotComponent(f"group {sorted(fg.atom_indices)} is not a component of the cut graph")
    fg_atoms = set().union(*(fg.atom_indices for fg in fgs)) if fgs else set()
    for block, kind in zip(blocks, kinds):
        if kind == NON_FG and fg_atoms.intersection(block):
            raise FGNotComponent(f"block {block} mixes group and non-group atoms")
    return PartitionSet(blocks, kinds)


def quotient(
    g: MolGraph,
    p: PartitionSet | Sequence[Sequence[int]],
    node_agg: str = "sum",
    edge_agg: str = "sum",
) -> QuotientGraph:
    """Contract every block of ``p`` to a single node.

    Two blocks are joined iff some original edge runs between them; the
    contracted edge's features aggregate exactly those edges.  Quotient
    nodes follow the block order of ``p``; quotient edges are ordered by
    (smaller block, larger block).
    """
    blocks = p.blocks if isinstance(p, PartitionSet) else [tuple(b) for b in p]
    f_node, f_edge = _agg(node_agg), _agg(edge_agg)
    block_of = np.full(g.num_nodes, -1, dtype=np.int64)
    for b, block in enumerate(blocks):
        for v in block:
            if block_of[v] >= 0:
                raise ValueError(f"node {v} appears in more than one block")
            block_of[v] = b
    if (block_of < 0).any():
        raise ValueError("partition does not cover every node")

    node_features = np.stack([f_node(g.node_features[list(block)]) for block in blocks])
    spans: dict[tuple[int, int], list[int]] = {}
    for k, (v, w) in enumerate(g.edges.tolist()):
        bv, bw = int(block_of[v]), int(block_of[w])
        if bv != bw:
            spans.setdefault((min(bv, bw), max(bv, bw)), []).append(k)
    pairs = sorted(spans)
    if pairs:
        edges = np.array(pairs, dtype=np.int64)
        edge_features = np.stack([f_edge(g.edge_features[spans[pr]]) for pr in pairs])
    else:
        edges = np.zeros((0, 2), dtype=np.int64)
        edge_features = np.zeros((0, g.e_i))

    # compose provenance when coarsening an already coarsened graph
    if isinstance(g, QuotientGraph) and g.node_blocks:
        node_blocks = [tuple(sorted(v for q in block for v in g.node_blocks[q])) for block in blocks]
        edge_sources = [tuple(sorted(s for k in spans[pr] for s in g.edge_sources[k])) for pr in pairs]
    else:
        node_blocks = [tuple(block) for block in blocks]
        edge_sources = [tuple(spans[pr]) for pr in pairs]
    return QuotientGraph(node_features, edges, edge_features, node_blocks, edge_sources)


def partition_for(m: Molecule, g: MolGraph | None = None) -> tuple[PartitionSet, list[FunctionalGroup]]:
    if g is None:
        g = featurize(m)
    fgs = functional_groups(m)
    cut = compute_cut_edges(g, fgs)
    return components_partition(g, cut, fgs), fgs


def funqg(
    m: Molecule,
    g: MolGraph | None = None,
    stage_a: tuple[str, str] = ("mean", "mean"),
    stage_b: tuple[str, str] = ("sum", "sum"),
) -> QuotientGraph:
    """Molecular quotient graph: mean over carbon blocks, then sum over groups.

    ``stage_a`` and ``stage_b`` are the (node, edge) aggregations of the two
    contractions.
    """
    if g is None:
        g = featurize(m)
    p, _ = partition_for(m, g)

    # stage (a): carbon-only blocks, functional-group atoms as singletons
    blocks_a: list[tuple[int, ...]] = []
    for block, kind in zip(p.blocks, p.kinds):
        if kind == NON_FG:
            blocks_a.append(block)
        else:
            blocks_a.extend((v,) for v in block)
    blocks_a.sort(key=lambda b: b[0])
    qa = quotient(g, blocks_a, *stage_a)

    # stage (b): functional groups over the stage-(a) nodes
    node_of = {b[0]: q for q, b in enumerate(qa.node_blocks) if len(b) == 1}
    blocks_b: list[tuple[int, ...]] = []
    for block, kind in zip(p.blocks, p.kinds):
        if kind == FG:
            blocks_b.append(tuple(node_of[v] for v in block))
    covered = {q for b in blocks_b for q in b}
    blocks_b.extend((q,) for q in range(qa.num_nodes) if q not in covered)
    blocks_b.sort(key=lambda b: min(qa.node_blocks[q][0] for q in b))
    return quotient(qa, blocks_b, *stage_b)


def abstraction_ratio(dataset: Iterable[tuple[MolGraph, MolGraph]]) -> float:
    """Total quotient nodes over total molecular-graph nodes."""
    total_mol = total_q = 0
    for g, q in dataset:
        total_mol += g.num_nodes
        total_q += q.num_nodes
    if total_mol == 0:
        raise EmptyDataset("no graphs to compare")
    return total_q / total_mol
