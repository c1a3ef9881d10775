"""Shared test utilities: fixture loading, random molecules, structural checks."""

from __future__ import annotations

import json
from collections import deque
from pathlib import Path

import numpy as np

from funqg import elements
from funqg.coarsen import FG, NON_FG, compute_cut_edges, components_partition, funqg, quotient
from funqg.featurizer import MolGraph, featurize
from funqg.functional_groups import functional_groups
from funqg.smiles import AROMATIC, DOUBLE, SINGLE, TRIPLE, Atom, Bond, Molecule, read_smiles, write_smiles

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
DATA = HERE.parent / "data"

DEQUALINIUM = "Cc1cc(N)c2ccccc2[n+]1CCCCCCCCCC[n+]1c(C)cc(N)c2ccccc21"
IRINOTECAN = "CCc1c2c(nc3ccc(OC(=O)N4CCC(N5CCCCC5)CC4)cc13)-c1cc3c(c(=O)n1C2)COC(=O)[C@]3(O)CC"


def load_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]


def reference() -> dict:
    return json.loads((FIXTURES / "reference.json").read_text())


def freesolv_smiles() -> list[str]:
    import csv

    with open(DATA / "freesolv.csv", newline="") as fh:
        return [row["smiles"] for row in csv.DictReader(fh)]


# six-node example graph with 1-based node labels
SIX_NODE_EDGES = [(3, 4), (1, 6), (4, 5), (5, 6), (3, 5), (3, 6), (2, 6), (1, 5)]
SIX_NODE_BLOCKS = [(3, 4, 5), (1, 6), (2,)]


def six_node_graph(rng=None) -> MolGraph:
    rng = rng or np.random.default_rng(0)
    edges = np.array([(u - 1, v - 1) for u, v in SIX_NODE_EDGES], dtype=np.int64)
    return MolGraph(rng.normal(size=(6, 4)), edges, rng.normal(size=(len(edges), 3)))


# --------------------------------------------------------------------------- random molecules

_ALIPHATIC = ["C"] * 8 + ["N", "N", "O", "O", "S", "F", "Cl", "Br"]
_ORDER_VALUE = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, AROMATIC: 1}


def random_molecule(rng: np.random.Generator, max_atoms: int = 24) -> Molecule:
    """A random valence-respecting molecule, read back through the SMILES writer.

    Built from a random tree of aliphatic atoms, a few extra ring-closing
    bonds, occasional double/triple upgrades and optional aromatic six-rings
    (benzene or pyridine) hung off the chain.
    """
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    used: list[int] = []

    def cap(i):
        return elements.DEFAULT_VALENCE[atoms[i].element] - used[i] - (1 if atoms[i].aromatic else 0)

    def add_bond(i, j, order):
        bonds.append(Bond(i, j, order))
        used[i] += _ORDER_VALUE[order]
        used[j] += _ORDER_VALUE[order]

    n = int(rng.integers(1, max_atoms + 1))
    for v in range(n):
        atoms.append(Atom(str(rng.choice(_ALIPHATIC))))
        used.append(0)
        if v:
            options = [u for u in range(v) if cap(u) >= 1]
            if not options:
                atoms[v] = Atom("C")
                options = [u for u in range(v) if cap(u) >= 1]
            if not options:
                atoms.pop()
                used.pop()
                break
            add_bond(int(rng.choice(options)), v, SINGLE)
    # aromatic rings
    for _ in range(int(rng.integers(0, 3))):
        hooks = [u for u in range(len(atoms)) if cap(u) >= 1 and not atoms[u].aromatic]
        if not hooks:
            break
        base = len(atoms)
        ring = ["c"] * 6
        if rng.random() < 0.3:
            ring[int(rng.integers(1, 6))] = "n"
        for k, sym in enumerate(ring):
            atoms.append(Atom(sym.upper(), aromatic=True))
            used.append(0)
        for k in range(6):
            add_bond(base + k, base + (k + 1) % 6, AROMATIC)
        add_bond(int(rng.choice(hooks)), base, SINGLE)
    # extra ring closures between aliphatic atoms
    for _ in range(int(rng.integers(0, 3))):
        cand = [u for u in range(len(atoms)) if cap(u) >= 1 and not atoms[u].aromatic]
        if len(cand) < 2:
            break
        i, j = rng.choice(cand, size=2, replace=False).tolist()
        if any({b.begin, b.end} == {i, j} for b in bonds):
            continue
        add_bond(i, j, SINGLE)
    # unsaturation
    for b in bonds:
        if b.order != SINGLE or atoms[b.begin].aromatic or atoms[b.end].aromatic:
            continue
        r = rng.random()
        if r < 0.12 and cap(b.begin) >= 1 and cap(b.end) >= 1:
            used[b.begin] += 1
            used[b.end] += 1
            b.order = DOUBLE
        elif r < 0.16 and cap(b.begin) >= 2 and cap(b.end) >= 2:
            used[b.begin] += 2
            used[b.end] += 2
            b.order = TRIPLE
    return read_smiles(write_smiles(Molecule(atoms, bonds, "")))


def random_molecules(count: int, seed: int = 0) -> list[Molecule]:
    rng = np.random.default_rng(seed)
    return [random_molecule(rng) for _ in range(count)]


# --------------------------------------------------------------------------- structural checks


def components_by_bfs(n: int, edges) -> list[set[int]]:
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen, out = set(), []
    for s in range(n):
        if s in seen:
            continue
        comp, queue = {s}, deque([s])
        seen.add(s)
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    comp.add(w)
                    queue.append(w)
        out.append(comp)
    return out


def one_step_blocks(m: Molecule) -> list[set[int]]:
    """Blocks computed directly: drop every bond with exactly one group atom
    or joining two different groups, then take components."""
    groups = functional_groups(m)
    owner = {v: k for k, fg in enumerate(groups) for v in fg.atom_indices}
    kept = []
    for b in m.bonds:
        ou, ov = owner.get(b.begin), owner.get(b.end)
        if ou is None and ov is None or ou == ov:
            kept.append((b.begin, b.end))
    return components_by_bfs(m.num_atoms, kept)


def structural_violations(m: Molecule) -> list[str]:
    """Every structural property the coarsening must satisfy, as failure messages."""
    bad: list[str] = []
    g = featurize(m)
    groups = functional_groups(m)
    cut = compute_cut_edges(g, groups)
    p = components_partition(g, cut, groups)

    members = [v for fg in groups for v in fg.atom_indices]
    if len(members) != len(set(members)):
        bad.append("groups overlap")
    if any(a.element != "C" and i not in set(members) for i, a in enumerate(m.atoms)):
        bad.append("a heteroatom is outside every group")

    # partition validity
    flat = [v for b in p.blocks for v in b]
    if sorted(flat) != list(range(m.num_atoms)):
        bad.append("blocks do not partition the atoms")
    # group blocks are components; remainder blocks are carbon
    fg_sets = {fg.atom_indices for fg in groups}
    got = {frozenset(b) for b, k in zip(p.blocks, p.kinds) if k == FG}
    if got != fg_sets:
        bad.append("group blocks differ from the detected groups")
    for b, k in zip(p.blocks, p.kinds):
        if k == NON_FG and any(m.atoms[v].element != "C" for v in b):
            bad.append(f"non-group block {b} has a heteroatom")
    for fg in groups:
        local = {v: i for i, v in enumerate(fg.sorted())}
        inner = [(local[b.begin], local[b.end]) for b in m.bonds if b.begin in local and b.end in local]
        if len(components_by_bfs(len(local), inner)) != 1:
            bad.append(f"group {fg.sorted()} is not connected")
    if {frozenset(b) for b in p.blocks} != {frozenset(b) for b in one_step_blocks(m)}:
        bad.append("blocks differ from the direct component oracle")

    # quotient structure
    q1 = quotient(g, p, "sum", "sum")
    q2 = funqg(m, g)
    pairs = [tuple(e) for e in q2.edges.tolist()]
    if any(u == v for u, v in pairs):
        bad.append("self-loop in quotient")
    if len(set(map(frozenset, pairs))) != len(pairs):
        bad.append("parallel edges in quotient")
    if q2.num_nodes != len(p.blocks):
        bad.append("quotient node count differs from block count")
    if len(components_by_bfs(g.num_nodes, g.edges.tolist())) == 1 and len(components_by_bfs(q2.num_nodes, pairs)) != 1:
        bad.append("quotient lost connectivity")
    s1 = {(frozenset(q1.node_blocks[u]), frozenset(q1.node_blocks[v])) for u, v in q1.edges.tolist()}
    s2 = {(frozenset(q2.node_blocks[u]), frozenset(q2.node_blocks[v])) for u, v in q2.edges.tolist()}
    if sorted(map(sorted, q1.node_blocks)) != sorted(map(sorted, q2.node_blocks)) or s1 != s2:
        bad.append("two-stage structure differs from one-step quotient")
    # edges exist exactly where some original bond joins the blocks
    block_of = {v: i for i, b in enumerate(q1.node_blocks) for v in b}
    expect = {frozenset((block_of[u], block_of[v])) for u, v in g.edges.tolist() if block_of[u] != block_of[v]}
    if expect != {frozenset(e) for e in q1.edges.tolist()}:
        bad.append("quotient edges do not match block adjacency")

    # conservation with sum at both stages; only cut bonds survive as edges
    qs = funqg(m, g, ("sum", "sum"), ("sum", "sum"))
    node_total = g.node_features.sum()
    if abs(qs.node_features.sum() - node_total) > 1e-9 * max(1.0, abs(node_total)):
        bad.append("node feature sum not conserved")
    edge_total = g.edge_features[sorted(cut)].sum() if cut else 0.0
    if abs(qs.edge_features.sum() - edge_total) > 1e-9 * max(1.0, abs(edge_total)):
        bad.append("edge feature sum not conserved over cut bonds")
    if q2.num_nodes > g.num_nodes:
        bad.append("quotient larger than molecule")
    if (q2.num_nodes == g.num_nodes) != all(len(b) == 1 for b in p.blocks):
        bad.append("node count equality does not match all-singleton blocks")
    return bad


# --------------------------------------------------------------------------- acceptance reporting

ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, passed: bool | None, detail: str, seconds: float | None = None) -> str:
    """Record one acceptance line; ``passed=None`` marks an informational item."""
    status = "INFO" if passed is None else "PASS" if passed else "FAIL"
    timing = "" if seconds is None else f" [{seconds:.2f} s]"
    line = f"criterion {number}: {status} - {detail}{timing}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line
