"""Atom and bond feature vectors.

Node features (37 columns)::

    element one-hot  [B, C, N, O, F, Si, P, S, Cl, Br, I, other]   12
    heavy degree     0..5 (clamped)                                  6
    formal charge    -2..+2 (clamped)                                5
    chirality        none, @, @@                                     3
    hydrogen count   0..4 (clamped)                                  5
    hybridization    sp, sp2, sp3, other                             4
    aromatic flag                                                    1
    atomic mass / 100                                                1

Edge features (9 columns)::

    bond order       single, double, triple, aromatic                4
    conjugated flag                                                  1
    in-ring flag                                                     1
    stereo           none, cis, trans                                3
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from funqg import elements
from funqg.errors import EmptyMolecule
from funqg.smiles import AROMATIC, DOUBLE, SINGLE, TRIPLE, Molecule

ELEMENTS = ("B", "C", "N", "O", "F", "Si", "P", "S", "Cl", "Br", "I")
DEGREES = 6
CHARGES = (-2, -1, 0, 1, 2)
CHIRAL_TAGS = ("", "@", "@@")
H_COUNTS = 5
HYBRIDIZATIONS = ("sp", "sp2", "sp3", "other")
BOND_ORDERS = (SINGLE, DOUBLE, TRIPLE, AROMATIC)
STEREO = ("none", "cis", "trans")

# (name, width) of each segment, in column order
ATOM_SEGMENTS = (
    ("element", len(ELEMENTS) + 1),
    ("degree", DEGREES),
    ("charge", len(CHARGES)),
    ("chirality", len(CHIRAL_TAGS)),
    ("hydrogens", H_COUNTS),
    ("hybridization", len(HYBRIDIZATIONS)),
    ("aromatic", 1),
    ("mass", 1),
)
BOND_SEGMENTS = (
    ("order", len(BOND_ORDERS)),
    ("conjugated", 1),
    ("in_ring", 1),
    ("stereo", len(STEREO)),
)
ONE_HOT_ATOM = ("element", "degree", "charge", "chirality", "hydrogens", "hybridization")
ONE_HOT_BOND = ("order", "stereo")

NODE_DIM = sum(w for _, w in ATOM_SEGMENTS)
EDGE_DIM = sum(w for _, w in BOND_SEGMENTS)


def segment_slices(segments) -> dict[str, slice]:
    out, start = {}, 0
    for name, width in segments:
        out[name] = slice(start, start + width)
        start += width
    return out


ATOM_SLICES = segment_slices(ATOM_SEGMENTS)
BOND_SLICES = segment_slices(BOND_SEGMENTS)


@dataclass
class MolGraph:
    """Featurized graph; each undirected bond appears once in ``edges``."""

    node_features: np.ndarray  # (num_nodes, NODE_DIM)
    edges: np.ndarray  # (num_edges, 2) int
    edge_features: np.ndarray  # (num_edges, EDGE_DIM)

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def n_i(self) -> int:
        return self.node_features.shape[1]

    @property
    def e_i(self) -> int:
        return self.edge_features.shape[1]


def _one_hot(index: int, width: int) -> list[float]:
    v = [0.0] * width
    v[index] = 1.0
    return v


def _mass(atom) -> float:
    if atom.isotope:
        return float(atom.isotope)
    return elements.ATOMIC_MASS.get(atom.element, 0.0)


def atom_features(atom_index: int, m: Molecule) -> np.ndarray:
    a = m.atoms[atom_index]
    el = ELEMENTS.index(a.element) if a.element in ELEMENTS else len(ELEMENTS)
    charge = min(max(a.formal_charge, CHARGES[0]), CHARGES[-1])
    feats = (
        _one_hot(el, len(ELEMENTS) + 1)
        + _one_hot(min(a.degree, DEGREES - 1), DEGREES)
        + _one_hot(CHARGES.index(charge), len(CHARGES))
        + _one_hot(CHIRAL_TAGS.index(a.chiral_tag), len(CHIRAL_TAGS))
        + _one_hot(min(a.implicit_h, H_COUNTS - 1), H_COUNTS)
        + _one_hot(HYBRIDIZATIONS.index(a.hybridization), len(HYBRIDIZATIONS))
        + [1.0 if a.aromatic else 0.0, _mass(a) / 100.0]
    )
    return np.asarray(feats, dtype=np.float64)


def bond_features(bond_index: int, m: Molecule) -> np.ndarray:
    b = m.bonds[bond_index]
    feats = (
        _one_hot(BOND_ORDERS.index(b.order), len(BOND_ORDERS))
        + [1.0 if b.conjugated else 0.0, 1.0 if b.in_ring else 0.0]
        + _one_hot(STEREO.index(b.stereo), len(STEREO))
    )
    return np.asarray(feats, dtype=np.float64)


def featurize(m: Molecule) -> MolGraph:
    if m.num_atoms == 0:
        raise EmptyMolecule("molecule has no atoms")
    x = np.stack([atom_features(i, m) for i in range(m.num_atoms)])
    if m.num_bonds:
        e = np.stack([bond_features(k, m) for k in range(m.num_bonds)])
        edges = np.array([(b.begin, b.end) for b in m.bonds], dtype=np.int64)
    else:
        e = np.zeros((0, EDGE_DIM))
        edges = np.zeros((0, 2), dtype=np.int64)
    return MolGraph(x, edges, e)
