"""SMILES reader.

Lexes and parses the subset of SMILES found in MoleculeNet-style datasets and
runs the perception passes the featurizer and functional-group detector need:
ring membership, implicit hydrogens, hybridization and conjugation.

Supported:
    - organic subset atoms (B, C, N, O, P, S, F, Cl, Br, I) and their
      aromatic lowercase forms
    - bracket atoms with isotope, chirality (@, @@), H count, charge and
      atom class (the class is ignored)
    - bonds ``- = # : / \\``, ring closures ``1``-``9`` and ``%nn``, branches
    - dot-separated fragments (largest fragment kept by default)

Aromaticity is taken from the lowercase notation as written; no
kekulization or aromaticity perception is attempted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

from funqg import elements
from funqg.errors import (
    BadRingDigit,
    DanglingBond,
    UnclosedRing,
    UnknownCharacter,
    UnsupportedFeature,
    UnterminatedBracket,
    UnterminatedBranch,
    ValenceImpossible,
)

log = logging.getLogger(__name__)

ORGANIC_ATOM = "organic-atom"
BRACKET_ATOM = "bracket-atom"
BOND = "bond"
RING_CLOSURE = "ring-closure"
BRANCH_OPEN = "branch-open"
BRANCH_CLOSE = "branch-close"
DOT = "dot"

SINGLE, DOUBLE, TRIPLE, AROMATIC = "single", "double", "triple", "aromatic"
BOND_ORDER_VALUE = {SINGLE: 1, DOUBLE: 2, TRIPLE: 3, AROMATIC: 1}
_BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC, "/": SINGLE, "\\": SINGLE}


@dataclass(frozen=True)
class Token:
    kind: str
    lexeme: str
    position: int
    symbol: str = ""
    aromatic: bool = False
    charge: int = 0
    hcount: int = 0
    isotope: int = 0
    chiral: str = ""
    bond: str = ""
    ring: int = -1


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    formal_charge: int = 0
    explicit_h: int | None = None  # None for organic-subset atoms
    implicit_h: int = 0
    chiral_tag: str = ""
    in_ring: bool = False
    hybridization: str = "other"
    degree: int = 0
    isotope: int = 0

    @property
    def total_h(self) -> int:
        return self.implicit_h


@dataclass
class Bond:
    begin: int
    end: int
    order: str = SINGLE
    in_ring: bool = False
    stereo: str = "none"
    conjugated: bool = False

    def other(self, idx: int) -> int:
        return self.end if idx == self.begin else self.begin


@dataclass
class Molecule:
    atoms: list[Atom]
    bonds: list[Bond]
    source_smiles: str = ""
    _adjacency: list | None = field(default=None, repr=False, compare=False)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def num_bonds(self) -> int:
        return len(self.bonds)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per atom, the list of ``(neighbor, bond_index)`` pairs."""
        if self._adjacency is None or len(self._adjacency) != len(self.atoms):
            adj = [[] for _ in self.atoms]
            for k, b in enumerate(self.bonds):
                adj[b.begin].append((b.end, k))
                adj[b.end].append((b.begin, k))
            self._adjacency = adj
        return self._adjacency

    def neighbors(self, idx: int) -> list[int]:
        return [n for n, _ in self.adjacency()[idx]]

    def bond_between(self, i: int, j: int) -> Bond | None:
        for n, k in self.adjacency()[i]:
            if n == j:
                return self.bonds[k]
        return None

    def copy(self) -> "Molecule":
        return Molecule(
            [replace(a) for a in self.atoms], [replace(b) for b in self.bonds], self.source_smiles
        )


# --------------------------------------------------------------------------- lexer


def _read_bracket(s: str, start: int) -> Token:
    end = s.find("]", start + 1)
    if end < 0:
        raise UnterminatedBracket("unterminated bracket atom", start, s)
    body = s[start + 1 : end]
    i = 0

    def err(msg, cls=UnknownCharacter):
        return cls(msg, start + 1 + i, s)

    digits = ""
    while i < len(body) and body[i].isdigit():
        digits += body[i]
        i += 1
    isotope = int(digits) if digits else 0

    if i >= len(body):
        raise err("bracket atom without element symbol")
    if body[i] == "*":
        raise err("wildcard atoms are not supported", UnsupportedFeature)
    symbol = ""
    aromatic = False
    for cand in elements.AROMATIC_BRACKET:
        if body.startswith(cand, i) and not (len(cand) == 1 and body[i : i + 2] in elements.ATOMIC_NUMBER):
            symbol, aromatic = cand, True
            break
    if not symbol:
        two = body[i : i + 2]
        if len(two) == 2 and two[1].islower() and two in elements.ATOMIC_NUMBER:
            symbol = two
        elif body[i] in elements.ATOMIC_NUMBER:
            symbol = body[i]
        else:
            raise err(f"unknown element in bracket atom: {body[i:]!r}")
    i += len(symbol)
    if aromatic:
        symbol = symbol[0].upper() + symbol[1:]

    chiral = ""
    if body.startswith("@@", i):
        chiral, i = "@@", i + 2
    elif body.startswith("@", i):
        chiral, i = "@", i + 1
    if chiral and i < len(body) and body[i].isalpha() and body[i] != "H":
        raise err("extended chirality classes are not supported", UnsupportedFeature)

    hcount = 0
    if i < len(body) and body[i] == "H":
        i += 1
        hcount = 1
        if i < len(body) and body[i].isdigit():
            hcount = int(body[i])
            i += 1

    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        ch = body[i]
        i += 1
        if i < len(body) and body[i].isdigit():
            n = ""
            while i < len(body) and body[i].isdigit():
                n += body[i]
                i += 1
            charge = sign * int(n)
        else:
            charge = sign
            while i < len(body) and body[i] == ch:
                charge += sign
                i += 1
        if not -4 <= charge <= 4:
            raise err(f"charge {charge:+d} outside [-4, +4]", UnsupportedFeature)

    if i < len(body) and body[i] == ":":
        i += 1
        if i >= len(body) or not body[i].isdigit():
            raise err("atom class needs digits")
        while i < len(body) and body[i].isdigit():
            i += 1

    if i != len(body):
        raise err(f"unexpected {body[i]!r} in bracket atom")

    return Token(
        BRACKET_ATOM,
        s[start : end + 1],
        start,
        symbol=symbol,
        aromatic=aromatic,
        charge=charge,
        hcount=hcount,
        isotope=isotope,
        chiral=chiral,
    )


def tokenize(smiles: str) -> list[Token]:
    """Split a SMILES string into tokens.

    The lexemes of the returned tokens concatenate back to ``smiles``.
    Branch parentheses are balance-checked here; ring-closure pairing is
    checked by :func:`parse`.
    """
    s = smiles
    if not s:
        raise UnknownCharacter("empty SMILES", 0, s)
    tokens: list[Token] = []
    depth_stack: list[int] = []
    i = 0
    n = len(s)
    while i < n:
        c = s[i]
        if c == "[":
            tok = _read_bracket(s, i)
        elif s.startswith("Cl", i) or s.startswith("Br", i):
            tok = Token(ORGANIC_ATOM, s[i : i + 2], i, symbol=s[i : i + 2])
        elif c in "BCNOPSFI":
            tok = Token(ORGANIC_ATOM, c, i, symbol=c)
        elif c in "bcnops":
            tok = Token(ORGANIC_ATOM, c, i, symbol=c.upper(), aromatic=True)
        elif c in _BOND_SYMBOLS:
            tok = Token(BOND, c, i, bond=c)
        elif c.isdigit():
            tok = Token(RING_CLOSURE, c, i, ring=int(c))
        elif c == "%":
            digits = s[i + 1 : i + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise BadRingDigit("'%' must be followed by two digits", i, s)
            tok = Token(RING_CLOSURE, s[i : i + 3], i, ring=int(digits))
        elif c == "(":
            depth_stack.append(i)
            tok = Token(BRANCH_OPEN, c, i)
        elif c == ")":
            if not depth_stack:
                raise UnterminatedBranch("unmatched ')'", i, s)
            depth_stack.pop()
            tok = Token(BRANCH_CLOSE, c, i)
        elif c == ".":
            tok = Token(DOT, c, i)
        elif c in "*$~":
            raise UnsupportedFeature(f"{c!r} is not supported", i, s)
        else:
            raise UnknownCharacter(f"unknown character {c!r}", i, s)
        tokens.append(tok)
        i += len(tok.lexeme)
    if depth_stack:
        raise UnterminatedBranch("unclosed '('", n, s)
    return tokens


# --------------------------------------------------------------------------- parser


def _check_valence(m: Molecule, positions: list[int]) -> None:
    bond_sum = [0] * m.num_atoms
    for b in m.bonds:
        v = BOND_ORDER_VALUE[b.order]
        bond_sum[b.begin] += v
        bond_sum[b.end] += v
    for idx, a in enumerate(m.atoms):
        cap = elements.MAX_VALENCE.get(a.element)
        if cap is None:
            continue
        total = bond_sum[idx] + (a.explicit_h or 0)
        if total > cap + abs(a.formal_charge):
            raise ValenceImpossible(
                f"{a.element} with valence {total} exceeds {cap}", positions[idx], m.source_smiles
            )


def _resolve_stereo(m: Molecule, directional: list[tuple[int, int, str]]) -> None:
    """Assign cis/trans to double bonds from '/' and '\\' markers.

    ``directional`` holds ``(written_first, written_second, char)`` per marked
    single bond.  Only the marks adjacent to a double bond are consulted.
    """
    if not directional:
        return
    marks: dict[tuple[int, int], str] = {}
    for a, b, ch in directional:
        marks[(a, b)] = ch
        marks[(b, a)] = "/" if ch == "\\" else "\\"  # read in the reverse direction

    def side(center, other):
        for nbr in m.neighbors(center):
            if nbr == other:
                continue
            if (nbr, center) in marks:
                return marks[(nbr, center)]
        return None

    for b in m.bonds:
        if b.order != DOUBLE:
            continue
        first, second = sorted((b.begin, b.end))
        d1 = side(first, second)
        if d1 is None:
            continue
        # direction of the mark seen from the second atom outwards
        d2 = None
        for nbr in m.neighbors(second):
            if nbr != first and (second, nbr) in marks:
                d2 = marks[(second, nbr)]
                break
        if d2 is None:
            continue
        b.stereo = "trans" if d1 == d2 else "cis"


def _fold_hydrogens(m: Molecule, positions: list[int]) -> tuple[Molecule, list[int], list[int]]:
    """Remove explicit [H] atoms bonded to exactly one heavy atom."""
    adj = m.adjacency()
    drop = set()
    folded = [0] * m.num_atoms
    for idx, a in enumerate(m.atoms):
        if a.element != "H" or a.isotope or len(adj[idx]) != 1:
            continue
        nbr, k = adj[idx][0]
        if m.atoms[nbr].element == "H" or m.bonds[k].order != SINGLE:
            continue
        drop.add(idx)
        folded[nbr] += 1
    if not drop:
        return m, positions, folded
    keep = [i for i in range(m.num_atoms) if i not in drop]
    remap = {old: new for new, old in enumerate(keep)}
    atoms = [m.atoms[i] for i in keep]
    bonds = [
        replace(b, begin=remap[b.begin], end=remap[b.end])
        for b in m.bonds
        if b.begin not in drop and b.end not in drop
    ]
    for old in keep:
        a = m.atoms[old]
        if folded[old] and a.explicit_h is not None:
            a.explicit_h += folded[old]
    return Molecule(atoms, bonds, m.source_smiles), [positions[i] for i in keep], [folded[i] for i in keep]


def fragments(m: Molecule) -> list[list[int]]:
    """Connected components as sorted atom-index lists, ordered by first atom."""
    seen = [False] * m.num_atoms
    out = []
    for start in range(m.num_atoms):
        if seen[start]:
            continue
        comp, stack = [], [start]
        seen[start] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in m.neighbors(v):
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        out.append(sorted(comp))
    return out


def subgraph(m: Molecule, keep: list[int]) -> Molecule:
    """Atom-induced submolecule, atoms kept in the given order."""
    remap = {old: new for new, old in enumerate(keep)}
    atoms = [replace(m.atoms[i]) for i in keep]
    bonds = [
        replace(b, begin=remap[b.begin], end=remap[b.end])
        for b in m.bonds
        if b.begin in remap and b.end in remap
    ]
    return Molecule(atoms, bonds, m.source_smiles)


def parse(tokens: list[Token], keep_largest_fragment: bool = True, smiles: str | None = None) -> Molecule:
    """Build a :class:`Molecule` from tokens.

    Bonds between adjacent atoms default to single, or aromatic when both
    atoms are aromatic.  With ``keep_largest_fragment`` the largest
    dot-separated fragment (by heavy atoms, first on ties) is kept and a
    warning is logged; otherwise multi-fragment input raises
    :class:`UnsupportedFeature`.
    """
    if smiles is None:
        smiles = "".join(t.lexeme for t in tokens)
    atoms: list[Atom] = []
    positions: list[int] = []
    bonds: list[Bond] = []
    bonded: set[tuple[int, int]] = set()
    directional: list[tuple[int, int, str]] = []
    prev: int | None = None
    pending: Token | None = None
    branch_stack: list[int | None] = []
    rings: dict[int, tuple[int, Token | None, int]] = {}

    def add_bond(a: int, b: int, tok: Token | None, pos: int) -> None:
        key = (min(a, b), max(a, b))
        if a == b or key in bonded:
            raise BadRingDigit("ring closure duplicates an existing bond", pos, smiles)
        if tok is None:
            order = AROMATIC if atoms[a].aromatic and atoms[b].aromatic else SINGLE
        else:
            order = _BOND_SYMBOLS[tok.bond]
            if order == AROMATIC and not (atoms[a].aromatic and atoms[b].aromatic):
                raise UnsupportedFeature("':' bond between non-aromatic atoms", tok.position, smiles)
            if tok.bond in "/\\":
                directional.append((a, b, tok.bond))
        bonded.add(key)
        bonds.append(Bond(a, b, order))

    for tok in tokens:
        kind = tok.kind
        if kind in (ORGANIC_ATOM, BRACKET_ATOM):
            atom = Atom(
                element=tok.symbol,
                aromatic=tok.aromatic,
                formal_charge=tok.charge,
                explicit_h=tok.hcount if kind == BRACKET_ATOM else None,
                chiral_tag=tok.chiral,
                isotope=tok.isotope,
            )
            atoms.append(atom)
            positions.append(tok.position)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending, tok.position)
            elif pending is not None:
                raise DanglingBond("bond without a preceding atom", pending.position, smiles)
            pending = None
            prev = idx
        elif kind == BOND:
            if pending is not None:
                raise DanglingBond("two consecutive bond symbols", tok.position, smiles)
            if prev is None:
                raise DanglingBond("bond without a preceding atom", tok.position, smiles)
            pending = tok
        elif kind == RING_CLOSURE:
            if prev is None:
                raise BadRingDigit("ring closure without a preceding atom", tok.position, smiles)
            if tok.ring in rings:
                other, open_bond, _ = rings.pop(tok.ring)
                if open_bond is not None and pending is not None and open_bond.bond != pending.bond:
                    raise BadRingDigit("conflicting ring-closure bond symbols", tok.position, smiles)
                bond_tok = pending if pending is not None else open_bond
                if bond_tok is not None and bond_tok is open_bond and bond_tok.bond in "/\\":
                    bond_tok = replace(bond_tok, bond="-")  # direction of a ring-opening mark is not tracked
                add_bond(other, prev, bond_tok, tok.position)
            else:
                rings[tok.ring] = (prev, pending, tok.position)
            pending = None
        elif kind == BRANCH_OPEN:
            if prev is None:
                raise UnterminatedBranch("branch without a preceding atom", tok.position, smiles)
            if pending is not None:
                raise DanglingBond("bond symbol before '('", pending.position, smiles)
            branch_stack.append(prev)
        elif kind == BRANCH_CLOSE:
            if pending is not None:
                raise DanglingBond("bond symbol before ')'", pending.position, smiles)
            if not branch_stack:
                raise UnterminatedBranch("unmatched ')'", tok.position, smiles)
            prev = branch_stack.pop()
        elif kind == DOT:
            if pending is not None:
                raise DanglingBond("bond symbol before '.'", pending.position, smiles)
            prev = None
    if pending is not None:
        raise DanglingBond("bond symbol at end of input", pending.position, smiles)
    if rings:
        pos = min(p for _, _, p in rings.values())
        raise UnclosedRing("ring closure never closed", pos, smiles)
    if branch_stack:
        raise UnterminatedBranch("unclosed '('", len(smiles), smiles)
    if not atoms:
        raise UnknownCharacter("no atoms", 0, smiles)

    m = Molecule(atoms, bonds, smiles)
    _resolve_stereo(m, directional)
    _check_valence(m, positions)
    m, positions, folded = _fold_hydrogens(m, positions)
    m._folded_h = folded  # consumed by assign_implicit_hydrogens

    frags = fragments(m)
    if len(frags) > 1:
        if not keep_largest_fragment:
            dot = next((t.position for t in tokens if t.kind == DOT), 0)
            raise UnsupportedFeature("multi-fragment SMILES", dot, smiles)
        sizes = [sum(1 for i in f if m.atoms[i].element != "H") for f in frags]
        best = max(range(len(frags)), key=lambda k: (sizes[k], -k))
        log.warning("%s: keeping largest of %d fragments", smiles, len(frags))
        folded = [folded[i] for i in frags[best]]
        m = subgraph(m, frags[best])
        m._folded_h = folded

    adj = m.adjacency()
    for idx, a in enumerate(m.atoms):
        a.degree = sum(1 for n, _ in adj[idx] if m.atoms[n].element != "H")
    return m


# --------------------------------------------------------------------------- perception


def _bridges(m: Molecule) -> set[int]:
    """Indices of bonds whose removal disconnects the graph (iterative Tarjan)."""
    n = m.num_atoms
    adj = m.adjacency()
    disc = [-1] * n
    low = [0] * n
    out: set[int] = set()
    t = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = t
        t += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, k in it:
                if k == via:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = t
                    t += 1
                    stack.append((w, k, iter(adj[w])))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if advanced:
                continue
            stack.pop()
            if stack:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[v])
                if low[v] > disc[parent]:
                    out.add(via)
    return out


def perceive_rings(m: Molecule) -> Molecule:
    """Flag ring bonds (non-bridges) and ring atoms.

    Aromatic bonds that turn out not to lie on any cycle (e.g. the implicit
    bond in ``c1ccccc1c1ccccc1``) are demoted to single bonds.
    """
    out = m.copy()
    out._folded_h = getattr(m, "_folded_h", None)
    bridges = _bridges(out)
    for a in out.atoms:
        a.in_ring = False
    for k, b in enumerate(out.bonds):
        b.in_ring = k not in bridges
        if b.in_ring:
            out.atoms[b.begin].in_ring = True
            out.atoms[b.end].in_ring = True
        elif b.order == AROMATIC:
            b.order = SINGLE
    return out


def bond_order_sums(m: Molecule) -> list[int]:
    sums = [0] * m.num_atoms
    for b in m.bonds:
        v = BOND_ORDER_VALUE[b.order]
        sums[b.begin] += v
        sums[b.end] += v
    return sums


def assign_implicit_hydrogens(m: Molecule) -> Molecule:
    """Fill ``implicit_h`` with the total hydrogen count of every atom.

    Bracket atoms keep their written H count.  Organic-subset atoms get
    ``max(0, default_valence - bond_order_sum - aromatic_penalty)`` where the
    penalty is 1 for aromatic atoms; hydrogens written as separate ``[H]``
    atoms count towards the bond order sum and are added back.
    """
    out = m.copy()
    folded = getattr(m, "_folded_h", None) or [0] * m.num_atoms
    sums = bond_order_sums(out)
    for idx, a in enumerate(out.atoms):
        if a.explicit_h is not None:
            a.implicit_h = a.explicit_h
            continue
        dv = elements.DEFAULT_VALENCE.get(a.element, 0)
        penalty = 1 if a.aromatic else 0
        a.implicit_h = max(0, dv - (sums[idx] + folded[idx]) - penalty) + folded[idx]
    return out


_SP3_ELEMENTS = frozenset({"C", "N", "O", "S", "P", "B", "Si"}) | elements.HALOGENS


def perceive_hybridization(m: Molecule) -> Molecule:
    """Assign sp/sp2/sp3/other from bond multiplicities and aromaticity."""
    out = m.copy()
    doubles = [0] * out.num_atoms
    triples = [0] * out.num_atoms
    for b in out.bonds:
        if b.order == DOUBLE:
            doubles[b.begin] += 1
            doubles[b.end] += 1
        elif b.order == TRIPLE:
            triples[b.begin] += 1
            triples[b.end] += 1
    for idx, a in enumerate(out.atoms):
        if triples[idx] or doubles[idx] >= 2:
            a.hybridization = "sp"
        elif doubles[idx] == 1 or a.aromatic:
            a.hybridization = "sp2"
        elif a.element in _SP3_ELEMENTS:
            a.hybridization = "sp3"
        else:
            a.hybridization = "other"
    return out


def perceive_conjugation(m: Molecule) -> Molecule:
    """A bond is conjugated if aromatic, or if both ends carry a multiple/aromatic bond."""
    out = m.copy()
    unsat = [False] * out.num_atoms
    for b in out.bonds:
        if b.order != SINGLE:
            unsat[b.begin] = unsat[b.end] = True
    for b in out.bonds:
        b.conjugated = b.order == AROMATIC or (unsat[b.begin] and unsat[b.end])
    return out


def read_smiles(smiles: str, keep_largest_fragment: bool = True) -> Molecule:
    """Tokenize, parse and run every perception pass."""
    m = parse(tokenize(smiles), keep_largest_fragment=keep_largest_fragment, smiles=smiles)
    m = perceive_rings(m)
    m = assign_implicit_hydrogens(m)
    m = perceive_hybridization(m)
    return perceive_conjugation(m)


# --------------------------------------------------------------------------- writer


def _atom_smiles(a: Atom) -> str:
    sym = a.element.lower() if a.aromatic else a.element
    plain = (
        a.element in elements.DEFAULT_VALENCE
        and a.explicit_h is None
        and not a.formal_charge
        and not a.isotope
        and not a.chiral_tag
    )
    if plain:
        return sym
    h = a.implicit_h if a.explicit_h is None else a.explicit_h
    out = "[" + (str(a.isotope) if a.isotope else "") + sym + a.chiral_tag
    if h:
        out += "H" + (str(h) if h > 1 else "")
    if a.formal_charge:
        out += ("+" if a.formal_charge > 0 else "-") + (str(abs(a.formal_charge)) if abs(a.formal_charge) > 1 else "")
    return out + "]"


_WRITE_BOND = {SINGLE: "-", DOUBLE: "=", TRIPLE: "#", AROMATIC: ":"}


def write_smiles(m: Molecule) -> str:
    """Emit a (non-canonical) SMILES string that reads back to an isomorphic graph.

    Every bond symbol is written explicitly so bond orders survive the round
    trip regardless of aromatic defaults.  Stereo marks are not emitted.
    """
    adj = m.adjacency()
    visited = [False] * m.num_atoms
    parts: list[str] = []
    next_digit = [1]
    ring_open: dict[int, list[tuple[int, int]]] = {}  # atom -> [(digit, bond)]
    tree_bonds: set[int] = set()

    # first pass: DFS tree to decide ring-closure bonds
    order = []
    for root in range(m.num_atoms):
        if visited[root]:
            continue
        stack = [(root, -1)]
        while stack:
            v, via = stack.pop()
            if visited[v]:
                continue
            visited[v] = True
            if via >= 0:
                tree_bonds.add(via)
            order.append(v)
            for w, k in reversed(adj[v]):
                if not visited[w]:
                    stack.append((w, k))
    closures = [k for k in range(m.num_bonds) if k not in tree_bonds]
    closure_at: dict[int, list[int]] = {i: [] for i in range(m.num_atoms)}
    for k in closures:
        closure_at[m.bonds[k].begin].append(k)
        closure_at[m.bonds[k].end].append(k)

    digit_of: dict[int, int] = {}
    written = [False] * m.num_atoms
    free_digits: list[int] = []

    def ring_label(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    def emit(v: int) -> None:
        written[v] = True
        parts.append(_atom_smiles(m.atoms[v]))
        for k in closure_at[v]:
            if k in digit_of:
                d = digit_of.pop(k)
                parts.append(_WRITE_BOND[m.bonds[k].order] + ring_label(d))
                free_digits.append(d)
            else:
                if free_digits:
                    free_digits.sort()
                    d = free_digits.pop(0)
                else:
                    d = next_digit[0]
                    next_digit[0] += 1
                digit_of[k] = d
                parts.append(ring_label(d))
        children = [(w, k) for w, k in adj[v] if k in tree_bonds and not written[w]]
        for j, (w, k) in enumerate(children):
            last = j == len(children) - 1
            if not last:
                parts.append("(")
            parts.append(_WRITE_BOND[m.bonds[k].order])
            emit(w)
            if not last:
                parts.append(")")

    del ring_open
    first = True
    for root in range(m.num_atoms):
        if written[root]:
            continue
        if not first:
            parts.append(".")
        first = False
        emit(root)
    return "".join(parts)
