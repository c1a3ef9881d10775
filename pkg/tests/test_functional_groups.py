import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from funqg.functional_groups import FunctionalGroup, extract_fgs, functional_groups, mark_atoms
from funqg.smiles import Molecule, read_smiles
from helpers import DEQUALINIUM, FIXTURES, freesolv_smiles, load_jsonl, random_molecule


def groups(smiles):
    return [fg.sorted() for fg in functional_groups(read_smiles(smiles))]


def test_hexane_marks_nothing():
    assert mark_atoms(read_smiles("CCCCCC")) == set()


def test_acetic_acid():
    m = read_smiles("CC(=O)O")
    assert mark_atoms(m) == {1, 2, 3}
    assert [len(fg) for fg in extract_fgs(m, mark_atoms(m))] == [3]


def test_ethene():
    assert mark_atoms(read_smiles("C=C")) == {0, 1}


def test_extract_empty():
    assert extract_fgs(read_smiles("CC"), set()) == []


def test_dequalinium_groups_are_single_atoms():
    found = functional_groups(read_smiles(DEQUALINIUM))
    assert found and all(len(fg) == 1 for fg in found)


@pytest.mark.parametrize(
    "smiles, expected",
    [
        ("CC#N", [[1, 2]]),
        ("COC(C)OC", [[1, 2, 4]]),
        ("C1CO1", [[0, 1, 2]]),
        ("c1ccncc1", [[3]]),
        ("O=c1cccc[nH]1", [[0], [6]]),
        ("CC=CC(=O)C", [[1, 2, 3, 4]]),
        ("OCCO", [[0], [3]]),
    ],
)
def test_rule_examples(smiles, expected):
    assert groups(smiles) == expected


def test_groups_ordered_by_smallest_index():
    found = groups("OCCCC(=O)CCN")
    assert found == sorted(found, key=min)


@pytest.mark.parametrize("row", load_jsonl(FIXTURES / "fg_parity.jsonl"), ids=lambda r: r["smiles"])
def test_parity_with_reference_fixture(row):
    assert groups(row["smiles"]) == row["groups"]


def test_parity_fixture_covers_declared_categories():
    rows = load_jsonl(FIXTURES / "fg_parity.jsonl")
    assert len(rows) == 25
    text = " ".join(r["smiles"] for r in rows)
    for token in ("=O", "#N", "OC(", "C=C", "O1", "n", "Cl", "F"):
        assert token in text
    assert any(r["groups"] == [] for r in rows)


def test_parity_over_freesolv():
    rows = load_jsonl(FIXTURES / "freesolv_reference.jsonl")
    mismatches = [r["smiles"] for r in rows if groups(r["smiles"]) != r["groups"]]
    assert mismatches == []


def _check_invariants(m):
    found = functional_groups(m)
    seen = set()
    for fg in found:
        assert not (seen & fg.atom_indices)
        seen |= fg.atom_indices
        # connected
        start = min(fg.atom_indices)
        comp, stack = {start}, [start]
        while stack:
            for w in m.neighbors(stack.pop()):
                if w in fg.atom_indices and w not in comp:
                    comp.add(w)
                    stack.append(w)
        assert comp == set(fg.atom_indices)
    for i, a in enumerate(m.atoms):
        if i not in seen:
            assert a.element == "C"


def test_invariants_over_corpus():
    for smi in freesolv_smiles():
        _check_invariants(read_smiles(smi))


@given(st.integers(0, 2**32 - 1))
def test_relabelling_maps_groups(seed):
    rng = np.random.default_rng(seed)
    m = random_molecule(rng)
    _check_invariants(m)
    perm = rng.permutation(m.num_atoms)  # new -> old
    inv = np.argsort(perm)
    m2 = Molecule(
        [m.atoms[p] for p in perm],
        [type(b)(int(inv[b.begin]), int(inv[b.end]), b.order, b.in_ring, b.stereo, b.conjugated) for b in m.bonds],
        "",
    )
    want = {frozenset(int(inv[v]) for v in fg.atom_indices) for fg in functional_groups(m)}
    assert {fg.atom_indices for fg in functional_groups(m2)} == want


def test_functional_group_value_semantics():
    assert FunctionalGroup(frozenset({2, 1})).sorted() == [1, 2]
    assert FunctionalGroup(frozenset({1})) == FunctionalGroup(frozenset({1}))
