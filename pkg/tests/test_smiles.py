import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from funqg import elements
from funqg.errors import (
    BadRingDigit,
    DanglingBond,
    SmilesError,
    UnclosedRing,
    UnknownCharacter,
    UnsupportedFeature,
    UnterminatedBracket,
    UnterminatedBranch,
    ValenceImpossible,
)
from funqg.smiles import (
    AROMATIC,
    BRACKET_ATOM,
    DOUBLE,
    ORGANIC_ATOM,
    SINGLE,
    TRIPLE,
    bond_order_sums,
    parse,
    read_smiles,
    tokenize,
    write_smiles,
)
from helpers import DEQUALINIUM, IRINOTECAN, freesolv_smiles, load_jsonl, FIXTURES, random_molecule, reference


# --------------------------------------------------------------------------- tokenize


def test_tokenize_simple_chain():
    toks = tokenize("CCO")
    assert [t.kind for t in toks] == [ORGANIC_ATOM] * 3
    assert [t.symbol for t in toks] == ["C", "C", "O"]


def test_tokenize_charged_aromatic_bracket():
    toks = tokenize(DEQUALINIUM)
    hits = [t for t in toks if t.kind == BRACKET_ATOM and t.symbol == "N" and t.aromatic and t.charge == 1]
    assert len(hits) == 2


@pytest.mark.parametrize(
    "smiles",
    ["CCO", DEQUALINIUM, IRINOTECAN, "[13CH3:2]C(=O)[O-]", "C%12CC%12", "F/C=C\\F", "[NH4+].[Cl-]", "[Fe+2]"],
)
def test_tokens_concatenate_to_input(smiles):
    assert "".join(t.lexeme for t in tokenize(smiles)) == smiles


def test_bracket_payload_decoded():
    (tok,) = tokenize("[13C@@H2-2]")
    assert (tok.isotope, tok.symbol, tok.chiral, tok.hcount, tok.charge) == (13, "C", "@@", 2, -2)


def test_unterminated_branch_reports_end_offset():
    with pytest.raises(UnterminatedBranch) as exc:
        tokenize("C(C")
    assert exc.value.position == 3


@pytest.mark.parametrize(
    "smiles, err, pos",
    [
        ("CC?", UnknownCharacter, 2),
        ("C[NH", UnterminatedBracket, 1),
        ("C)C", UnterminatedBranch, 1),
        ("C%1C", BadRingDigit, 1),
        ("C*C", UnsupportedFeature, 1),
        ("[Xx]", UnknownCharacter, 1),
    ],
)
def test_lexer_errors_carry_offsets(smiles, err, pos):
    with pytest.raises(err) as exc:
        tokenize(smiles)
    assert exc.value.position == pos
    assert str(pos) in str(exc.value)


# --------------------------------------------------------------------------- parse


def test_parse_chain():
    m = read_smiles("CCO")
    assert m.num_atoms == 3 and m.num_bonds == 2
    assert all(b.order == SINGLE for b in m.bonds)


def test_parse_cyclopropane():
    m = read_smiles("C1CC1")
    assert m.num_atoms == 3 and m.num_bonds == 3
    assert all(b.in_ring for b in m.bonds)


def test_default_bond_is_aromatic_between_aromatic_atoms():
    m = read_smiles("c1ccccc1-c1ccccc1")
    orders = Counter(b.order for b in m.bonds)
    assert orders == {AROMATIC: 12, SINGLE: 1}


@pytest.mark.parametrize("key", ["dequalinium", "irinotecan"])
def test_heavy_atom_and_ring_counts_match_reference(key):
    ref = reference()[key]
    m = read_smiles(ref["smiles"])
    assert m.num_atoms == ref["heavy_atoms"]
    assert m.num_bonds == ref["bonds"]
    assert sum(b.in_ring for b in m.bonds) == ref["ring_bonds"]


def test_freesolv_counts_match_reference():
    rows = load_jsonl(FIXTURES / "freesolv_reference.jsonl")
    assert len(rows) == 642
    for row in rows:
        m = read_smiles(row["smiles"])
        assert m.num_atoms == row["heavy_atoms"], row["smiles"]
        assert sum(b.in_ring for b in m.bonds) == row["ring_bonds"], row["smiles"]


@pytest.mark.parametrize(
    "smiles, err",
    [
        ("C1CC", UnclosedRing),
        ("CC=", DanglingBond),
        ("=CC", DanglingBond),
        ("C==C", DanglingBond),
        ("C(=)C", DanglingBond),
        ("C1C1", BadRingDigit),  # duplicates the existing C-C bond
        ("C12CC12", BadRingDigit),
        ("C=1CC-1", BadRingDigit),
        ("C(C)(C)(C)(C)C", ValenceImpossible),
        ("O=O=O", ValenceImpossible),
        ("C.C", None),
    ],
)
def test_parse_errors(smiles, err):
    if err is None:
        assert read_smiles(smiles).num_atoms == 1
        return
    with pytest.raises(err):
        read_smiles(smiles)


def test_multi_fragment_without_reduction_is_rejected():
    with pytest.raises(UnsupportedFeature):
        read_smiles("CCO.[Na+]", keep_largest_fragment=False)


def test_largest_fragment_kept(caplog):
    m = read_smiles("[Na+].CC(=O)[O-]")
    assert [a.element for a in m.atoms] == ["C", "C", "O", "O"]
    assert "fragment" in caplog.text


def test_largest_fragment_tie_keeps_first():
    m = read_smiles("CO.CN")
    assert [a.element for a in m.atoms] == ["C", "O"]


def test_explicit_hydrogen_atoms_are_folded():
    m = read_smiles("[H]C([H])([H])O")
    assert [a.element for a in m.atoms] == ["C", "O"]
    assert m.atoms[0].implicit_h == 3


def test_ring_closure_bond_appears_once():
    m = read_smiles("C1CCCCC1")
    pairs = [frozenset((b.begin, b.end)) for b in m.bonds]
    assert len(pairs) == len(set(pairs)) == 6


def test_percent_ring_labels():
    assert read_smiles("C%10CCC%10").num_bonds == 4


def test_stereo_markers():
    trans = read_smiles("C/C=C/C")
    cis = read_smiles("C/C=C\\C")
    branch = read_smiles("C(/F)=C/F")
    (dt,) = [b for b in trans.bonds if b.order == DOUBLE]
    (dc,) = [b for b in cis.bonds if b.order == DOUBLE]
    (db,) = [b for b in branch.bonds if b.order == DOUBLE]
    assert (dt.stereo, dc.stereo, db.stereo) == ("trans", "cis", "cis")
    assert read_smiles("CC=CC").bonds[1].stereo == "none"


def test_chirality_recorded():
    m = read_smiles("N[C@@H](C)C(=O)O")
    assert m.atoms[1].chiral_tag == "@@"


def test_graph_is_simple_and_loopless_over_corpus():
    for smi in freesolv_smiles():
        m = read_smiles(smi)
        pairs = [frozenset((b.begin, b.end)) for b in m.bonds]
        assert all(len(p) == 2 for p in pairs)
        assert len(set(pairs)) == len(pairs)
        for b in m.bonds:
            if b.order == AROMATIC:
                assert m.atoms[b.begin].aromatic and m.atoms[b.end].aromatic


def test_parser_is_total_over_corpus():
    for smi in freesolv_smiles() + [DEQUALINIUM, IRINOTECAN]:
        try:
            read_smiles(smi)
        except SmilesError:
            pass


@given(st.text(alphabet="CNOcn()=#123[]+-H@/\\.%", max_size=24))
def test_parser_never_crashes(text):
    try:
        read_smiles(text)
    except SmilesError:
        pass


# --------------------------------------------------------------------------- perception


def _brute_force_ring_bonds(m):
    """Bond is in a ring iff removing it leaves its endpoints connected."""
    out = set()
    for k, b in enumerate(m.bonds):
        adj = {i: set() for i in range(m.num_atoms)}
        for j, c in enumerate(m.bonds):
            if j != k:
                adj[c.begin].add(c.end)
                adj[c.end].add(c.begin)
        seen, stack = {b.begin}, [b.begin]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if b.end in seen:
            out.add(k)
    return out


@pytest.mark.parametrize("smiles, expected", [("C1CCCCC1", 6), ("CCO", 0), ("C1CC2CCC1CC2", 9), ("C1CC1CC1CC1", 6)])
def test_ring_perception(smiles, expected):
    m = read_smiles(smiles)
    ring = {k for k, b in enumerate(m.bonds) if b.in_ring}
    assert len(ring) == expected
    assert ring == _brute_force_ring_bonds(m)
    for i, a in enumerate(m.atoms):
        assert a.in_ring == any(m.bonds[k].in_ring for _, k in m.adjacency()[i])


def test_ring_perception_matches_brute_force_on_random_molecules():
    rng = np.random.default_rng(7)
    for _ in range(150):
        m = random_molecule(rng)
        assert {k for k, b in enumerate(m.bonds) if b.in_ring} == _brute_force_ring_bonds(m)


@pytest.mark.parametrize(
    "smiles, idx, h",
    [("c1ccccc1", 0, 1), ("c1ccncc1", 3, 0), ("CCO", 2, 1), ("C", 0, 4), ("[NH4+]", 0, 4), ("c1cc[nH]c1", 3, 1), ("CC(=O)O", 1, 0)],
)
def test_implicit_hydrogens(smiles, idx, h):
    assert read_smiles(smiles).atoms[idx].implicit_h == h


def test_valence_sum_invariant():
    # clamping can only raise the left-hand side above the default valences
    rng = np.random.default_rng(3)
    for smi in freesolv_smiles()[:300] + [write_smiles(random_molecule(rng)) for _ in range(100)]:
        m = read_smiles(smi)
        sums = bond_order_sums(m)
        lhs = rhs = 0
        clamped = False
        for a, s in zip(m.atoms, sums):
            if a.explicit_h is not None or a.element not in elements.DEFAULT_VALENCE:
                continue
            pen = 1 if a.aromatic else 0
            dv = elements.DEFAULT_VALENCE[a.element]
            lhs += s + a.implicit_h + pen
            rhs += dv
            clamped |= dv - s - pen < 0
        assert (lhs == rhs) == (not clamped)
        assert lhs >= rhs


@pytest.mark.parametrize(
    "smiles, hyb",
    [("C=C", ["sp2", "sp2"]), ("C#N", ["sp", "sp"]), ("CCCC", ["sp3"] * 4), ("C=C=C", ["sp2", "sp", "sp2"]), ("c1ccccc1", ["sp2"] * 6)],
)
def test_hybridization(smiles, hyb):
    assert [a.hybridization for a in read_smiles(smiles).atoms] == hyb


def test_conjugation_flags():
    m = read_smiles("C=CC=C")
    assert [b.conjugated for b in m.bonds] == [True, True, True]
    m = read_smiles("C=CCC=C")
    assert [b.conjugated for b in m.bonds] == [True, False, False, True]
    assert not read_smiles("CCO").bonds[0].conjugated


# --------------------------------------------------------------------------- round trip


def _signature(m):
    atoms = Counter((a.element, a.aromatic, a.formal_charge, a.implicit_h) for a in m.atoms)
    bonds = Counter(
        (tuple(sorted((m.atoms[b.begin].element, m.atoms[b.end].element))), b.order, b.in_ring) for b in m.bonds
    )
    degrees = sorted(len(m.adjacency()[i]) for i in range(m.num_atoms))
    return atoms, bonds, degrees


def test_round_trip_on_corpus():
    for smi in freesolv_smiles() + [DEQUALINIUM, IRINOTECAN]:
        m = read_smiles(smi)
        assert _signature(read_smiles(write_smiles(m))) == _signature(m), smi


@given(st.integers(0, 2**32 - 1))
def test_round_trip_on_random_molecules(seed):
    m = random_molecule(np.random.default_rng(seed))
    again = read_smiles(write_smiles(m))
    assert _signature(again) == _signature(m)


def test_parse_accepts_token_list_directly():
    toks = tokenize("C1=CC=CC=C1")
    m = parse(toks)
    assert m.num_atoms == 6
    assert Counter(b.order for b in m.bonds) == {SINGLE: 3, DOUBLE: 3}


def test_triple_bond_order_sum():
    m = read_smiles("CC#N")
    assert bond_order_sums(m) == [1, 4, 3]
    assert m.bonds[1].order == TRIPLE


def test_all_permutations_of_small_ring_parse():
    for perm in itertools.permutations("CCN"):
        s = f"{perm[0]}1{perm[1]}{perm[2]}1"
        assert read_smiles(s).num_bonds == 3
