"""Functional-group detection after Ertl's marking algorithm.

Atoms are marked by five rules and the connected components of the marked
atoms are the functional groups:

    R1  every heteroatom (any heavy atom that is not carbon)
    R2  every aliphatic carbon bonded to a heteroatom by a double or triple bond
    R3  both carbons of every aliphatic C=C or C#C bond
    R4  acetal-like carbons: aliphatic sp3 carbons (four connections counting
        hydrogens) with at least two single bonds to aliphatic O, N or S
    R5  all atoms of oxirane, aziridine and thiirane rings (an aliphatic O,
        N or S in a three-membered ring with two aliphatic carbons)

Aromatic heteroatoms are marked on their own; aromatic carbons are never
marked, so ``c(=O)`` in a pyridone contributes only its oxygen.
"""

from __future__ import annotations

from dataclasses import dataclass

from funqg.smiles import AROMATIC, DOUBLE, SINGLE, TRIPLE, Molecule


@dataclass(frozen=True)
class FunctionalGroup:
    atom_indices: frozenset[int]

    def __len__(self) -> int:
        return len(self.atom_indices)

    def sorted(self) -> list[int]:
        return sorted(self.atom_indices)


_ONS = frozenset({"O", "N", "S"})


def _aliphatic(m: Molecule, i: int, element: str | None = None) -> bool:
    a = m.atoms[i]
    return not a.aromatic and (element is None or a.element == element)


def mark_atoms(m: Molecule) -> set[int]:
    """Union of the atoms matched by rules R1-R5."""
    marked: set[int] = set()
    atoms = m.atoms
    for i, a in enumerate(atoms):
        if a.element not in ("C", "H"):
            marked.add(i)

    for b in m.bonds:
        i, j = b.begin, b.end
        if b.order in (DOUBLE, TRIPLE):
            ei, ej = atoms[i].element, atoms[j].element
            # R2
            if ej != "C" and not atoms[i].aromatic:
                marked.update((i, j))
            if ei != "C" and not atoms[j].aromatic:
                marked.update((i, j))
            # R3
            if ei == "C" and ej == "C" and _aliphatic(m, i) and _aliphatic(m, j):
                marked.update((i, j))

    adj = m.adjacency()
    for i, a in enumerate(atoms):
        if a.element != "C" or a.aromatic:
            continue
        # R4: total connections (heavy neighbours + hydrogens) must be four
        if len(adj[i]) + a.implicit_h != 4:
            continue
        hetero = [
            n
            for n, k in adj[i]
            if m.bonds[k].order == SINGLE and atoms[n].element in _ONS and not atoms[n].aromatic
        ]
        if len(hetero) >= 2:
            marked.add(i)
            marked.update(hetero)

    # R5
    for i, a in enumerate(atoms):
        if a.element not in _ONS or a.aromatic:
            continue
        nbrs = [
            (n, k)
            for n, k in adj[i]
            if atoms[n].element == "C" and not atoms[n].aromatic and m.bonds[k].order in (SINGLE, AROMATIC)
        ]
        for x in range(len(nbrs)):
            for y in range(x + 1, len(nbrs)):
                c1, c2 = nbrs[x][0], nbrs[y][0]
                cc = m.bond_between(c1, c2)
                if cc is not None and cc.order in (SINGLE, AROMATIC):
                    marked.update((i, c1, c2))
    return marked


def extract_fgs(m: Molecule, marked: set[int]) -> list[FunctionalGroup]:
    """Connected components of the subgraph induced by ``marked``.

    Groups are ordered by their smallest atom index.
    """
    remaining = set(marked)
    groups = []
    for start in sorted(marked):
        if start not in remaining:
            continue
        remaining.discard(start)
        comp, stack = {start}, [start]
        while stack:
            v = stack.pop()
            for w in m.neighbors(v):
                if w in remaining:
                    remaining.discard(w)
                    comp.add(w)
                    stack.append(w)
        groups.append(FunctionalGroup(frozenset(comp)))
    return groups


def functional_groups(m: Molecule) -> list[FunctionalGroup]:
    return extract_fgs(m, mark_atoms(m))
