"""Molecular graphs from SMILES text: parsing, canonical output, fragments.

Self-contained on purpose: search-graph node identity rests entirely on the
canonical key, so the parse/canonicalize pipeline has to be deterministic
across runs and platforms. Stereo markers are accepted and discarded, and
aromaticity is taken as written (lowercase means aromatic, no perception
pass). Implicit hydrogens follow the usual organic-subset valence rules.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

# Bond order codes. Aromatic is its own bond type, not a perceived property.
SINGLE = 1
DOUBLE = 2
TRIPLE = 3
AROMATIC = 4

ELEMENTS = frozenset(
    """H He Li Be B C N O F Ne Na Mg Al Si P S Cl Ar K Ca Sc Ti V Cr Mn Fe Co
    Ni Cu Zn Ga Ge As Se Br Kr Rb Sr Y Zr Nb Mo Tc Ru Rh Pd Ag Cd In Sn Sb Te
    I Xe Cs Ba La Ce Pr Nd Pm Sm Eu Gd Tb Dy Ho Er Tm Yb Lu Hf Ta W Re Os Ir
    Pt Au Hg Tl Pb Bi Po At Rn Fr Ra Ac Th Pa U Np Pu Am Cm Bk Cf Es Fm Md No
    Lr Rf Db Sg Bh Hs Mt Ds Rg Cn Nh Fl Mc Lv Ts Og""".split()
)

# Elements writable without brackets, and the lowercase aromatic spellings.
ORGANIC_SUBSET = frozenset({"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})
AROMATIC_ORGANIC = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}
AROMATIC_BRACKET = {"b", "c", "n", "o", "p", "s", "se", "as", "te", "si"}

# Standard valences used for implicit hydrogen counting on bare atoms.
_VALENCES = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

_CHIRAL_TAGS = ("TH", "AL", "SP", "TB", "OH")

# Cap on canonical-rank tie-break exploration (see _canonical_component).
_TIEBREAK_LEAF_BUDGET = 64


class SmilesError(ValueError):
    """Malformed SMILES input. ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True, slots=True)
class Atom:
    """One atom. ``explicit_h`` is the total attached hydrogen count."""

    element: str
    formal_charge: int = 0
    aromatic: bool = False
    explicit_h: int = 0
    isotope: Optional[int] = None

    def __post_init__(self):
        if self.element not in ELEMENTS:
            raise ValueError(f"unknown element symbol {self.element!r}")
        if not 0 <= self.explicit_h <= 8:
            raise ValueError(f"hydrogen count {self.explicit_h} out of range")
        if self.isotope is not None and self.isotope <= 0:
            raise ValueError(f"isotope must be positive, got {self.isotope}")


@dataclass(frozen=True, slots=True)
class Bond:
    """Undirected bond between atom indices ``a`` and ``b``."""

    a: int
    b: int
    order: int = SINGLE

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("bond endpoints must be distinct")
        if self.order not in (SINGLE, DOUBLE, TRIPLE, AROMATIC):
            raise ValueError(f"invalid bond order {self.order}")

    @property
    def aromatic(self) -> bool:
        return self.order == AROMATIC

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


class Molecule:
    """Immutable molecular graph; may hold several connected components.

    ``neighbors[i]`` lists ``(atom_index, bond_index)`` pairs. The canonical
    key is computed lazily and cached; molecules compare equal when their
    canonical keys match, so they can be used directly in sets and dicts.
    """

    __slots__ = ("atoms", "bonds", "neighbors", "_canonical")

    def __init__(self, atoms: Iterable[Atom], bonds: Iterable[Bond]):
        self.atoms: tuple[Atom, ...] = tuple(atoms)
        self.bonds: tuple[Bond, ...] = tuple(bonds)
        if not self.atoms:
            raise ValueError("a molecule needs at least one atom")
        n = len(self.atoms)
        nbrs: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        seen_pairs: set[tuple[int, int]] = set()
        for bidx, bond in enumerate(self.bonds):
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ValueError(f"bond {bidx} references a missing atom")
            pair = (bond.a, bond.b) if bond.a < bond.b else (bond.b, bond.a)
            if pair in seen_pairs:
                raise ValueError(f"duplicate bond between atoms {pair}")
            seen_pairs.add(pair)
            nbrs[bond.a].append((bond.b, bidx))
            nbrs[bond.b].append((bond.a, bidx))
        self.neighbors: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(x) for x in nbrs
        )
        self._canonical: Optional[str] = None

    @property
    def atom_count(self) -> int:
        return len(self.atoms)

    @property
    def canonical_key(self) -> str:
        if self._canonical is None:
            self._canonical = write_canonical(self)
        return self._canonical

    def components(self) -> list[list[int]]:
        """Connected components as sorted lists of atom indices."""
        n = len(self.atoms)
        seen = [False] * n
        comps: list[list[int]] = []
        for start in range(n):
            if seen[start]:
                continue
            comp = [start]
            seen[start] = True
            stack = [start]
            while stack:
                at = stack.pop()
                for nbr, _ in self.neighbors[at]:
                    if not seen[nbr]:
                        seen[nbr] = True
                        comp.append(nbr)
                        stack.append(nbr)
            comps.append(sorted(comp))
        return comps

    def __eq__(self, other) -> bool:
        if not isinstance(other, Molecule):
            return NotImplemented
        return self.canonical_key == other.canonical_key

    def __hash__(self) -> int:
        return hash(self.canonical_key)

    def __repr__(self) -> str:
        return f"Molecule({self.canonical_key!r})"

    def __getstate__(self):
        return (self.atoms, self.bonds, self._canonical)

    def __setstate__(self, state):
        atoms, bonds, canonical = state
        self.__init__(atoms, bonds)
        self._canonical = canonical


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


class _AtomDraft:
    __slots__ = ("element", "charge", "aromatic", "explicit_h", "isotope")

    def __init__(self, element, charge=0, aromatic=False, explicit_h=None,
                 isotope=None):
        self.element = element
        self.charge = charge
        self.aromatic = aromatic
        self.explicit_h = explicit_h  # None means "derive from valence rules"
        self.isotope = isotope


_BOND_CHARS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC,
               "/": SINGLE, "\\": SINGLE}


def parse_smiles(text: str) -> Molecule:
    """Parse a SMILES string into a :class:`Molecule`.

    Supports the organic subset, bracket atoms with isotope/H-count/charge,
    branches, ring closures (including ``%nn``), explicit bond orders,
    aromatic lowercase notation and ``.`` fragment separators. Stereo markers
    (``/``, ``\\``, ``@``) parse but are dropped. Raises :class:`SmilesError`
    carrying a byte offset on malformed input.
    """
    text = text.strip()
    if not text:
        raise SmilesError("empty SMILES", 0)

    atoms: list[_AtomDraft] = []
    bonds: list[tuple[int, int, int]] = []
    bond_pairs: set[tuple[int, int]] = set()
    prev: Optional[int] = None
    stack: list[tuple[Optional[int], int]] = []  # (saved prev, '(' offset)
    pending: Optional[int] = None  # bond order awaiting its target
    pending_off = 0
    rings: dict[int, tuple[int, Optional[int], int]] = {}

    def add_bond(a: int, b: int, order: Optional[int], offset: int) -> None:
        if a == b:
            raise SmilesError("ring bond to the same atom", offset)
        pair = (a, b) if a < b else (b, a)
        if pair in bond_pairs:
            raise SmilesError("duplicate bond between the same atoms", offset)
        if order is None:
            order = AROMATIC if atoms[a].aromatic and atoms[b].aromatic else SINGLE
        bond_pairs.add(pair)
        bonds.append((a, b, order))

    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "(":
            if prev is None:
                raise SmilesError("branch start before any atom", i)
            if pending is not None:
                raise SmilesError("dangling bond before branch", pending_off)
            stack.append((prev, i))
            i += 1
        elif ch == ")":
            if not stack:
                raise SmilesError("unmatched ')'", i)
            if pending is not None:
                raise SmilesError("dangling bond before ')'", pending_off)
            prev = stack.pop()[0]
            i += 1
        elif ch in _BOND_CHARS:
            if pending is not None:
                raise SmilesError("two bond symbols in a row", i)
            pending = _BOND_CHARS[ch]
            pending_off = i
            i += 1
        elif ch == ".":
            if pending is not None:
                raise SmilesError("bond symbol before '.'", pending_off)
            prev = None
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesError("ring closure before any atom", i)
            if ch == "%":
                if i + 2 >= n or not text[i + 1].isdigit() or not text[i + 2].isdigit():
                    raise SmilesError("'%' needs two digits", i)
                num = int(text[i + 1 : i + 3])
                width = 3
            else:
                num = int(ch)
                width = 1
            if num in rings:
                other, open_order, open_off = rings.pop(num)
                order = pending if pending is not None else open_order
                if (pending is not None and open_order is not None
                        and pending != open_order):
                    raise SmilesError(f"ring bond {num} order mismatch", i)
                add_bond(other, prev, order, i)
            else:
                rings[num] = (prev, pending, i)
            pending = None
            i += width
        elif ch == "[":
            j = text.find("]", i + 1)
            if j < 0:
                raise SmilesError("unterminated bracket atom", i)
            draft = _parse_bracket(text[i + 1 : j], i + 1)
            if prev is None and pending is not None:
                raise SmilesError("bond symbol with no preceding atom", pending_off)
            atoms.append(draft)
            if prev is not None:
                add_bond(prev, len(atoms) - 1, pending, i)
            prev = len(atoms) - 1
            pending = None
            i = j + 1
        else:
            draft, width = _parse_bare_atom(text, i)
            if prev is None and pending is not None:
                raise SmilesError("bond symbol with no preceding atom", pending_off)
            atoms.append(draft)
            if prev is not None:
                add_bond(prev, len(atoms) - 1, pending, i)
            prev = len(atoms) - 1
            pending = None
            i += width

    if pending is not None:
        raise SmilesError("dangling bond at end of input", pending_off)
    if stack:
        raise SmilesError("unclosed '('", stack[-1][1])
    if rings:
        num, (_, _, off) = next(iter(rings.items()))
        raise SmilesError(f"unclosed ring bond {num}", off)

    return _finish(atoms, bonds)


def _parse_bare_atom(text: str, i: int) -> tuple[_AtomDraft, int]:
    ch = text[i]
    nxt = text[i + 1] if i + 1 < len(text) else ""
    if ch == "C" and nxt == "l":
        return _AtomDraft("Cl"), 2
    if ch == "B" and nxt == "r":
        return _AtomDraft("Br"), 2
    if ch in "BCNOPSFI":
        return _AtomDraft(ch), 1
    if ch in AROMATIC_ORGANIC:
        return _AtomDraft(AROMATIC_ORGANIC[ch], aromatic=True), 1
    raise SmilesError(f"unexpected character {ch!r}", i)


def _parse_bracket(body: str, base: int) -> _AtomDraft:
    """Parse the inside of a bracket atom, e.g. ``13CH3+`` or ``O-``."""
    if not body:
        raise SmilesError("empty bracket atom", base)
    k = 0
    m = len(body)

    isotope = None
    start = k
    while k < m and body[k].isdigit():
        k += 1
    if k > start:
        isotope = int(body[start:k])
        if isotope == 0:
            raise SmilesError("isotope must be positive", base + start)

    if k >= m:
        raise SmilesError("bracket atom missing element", base + k)

    aromatic = False
    two = body[k : k + 2]
    if two in AROMATIC_BRACKET:
        element, aromatic, k = two.capitalize(), True, k + 2
    elif body[k] in AROMATIC_BRACKET:
        element, aromatic, k = body[k].upper(), True, k + 1
    elif two and two[0].isupper() and two[1:].islower() and two in ELEMENTS:
        element, k = two, k + 2
    elif body[k].isupper() and body[k] in ELEMENTS:
        element, k = body[k], k + 1
    else:
        raise SmilesError(f"unknown element in bracket: {body[k:]!r}", base + k)

    # Chirality markers are accepted and discarded.
    if k < m and body[k] == "@":
        k += 1
        if k < m and body[k] == "@":
            k += 1
        elif body[k : k + 2] in _CHIRAL_TAGS:
            k += 2
            while k < m and body[k].isdigit():
                k += 1

    explicit_h = 0
    if k < m and body[k] == "H":
        k += 1
        start = k
        while k < m and body[k].isdigit():
            k += 1
        explicit_h = int(body[start:k]) if k > start else 1
        if explicit_h > 8:
            raise SmilesError("hydrogen count out of range", base + start)

    charge = 0
    if k < m and body[k] in "+-":
        sign = 1 if body[k] == "+" else -1
        symbol = body[k]
        k += 1
        if k < m and body[k].isdigit():
            start = k
            while k < m and body[k].isdigit():
                k += 1
            charge = sign * int(body[start:k])
        else:
            count = 1
            while k < m and body[k] == symbol:
                count += 1
                k += 1
            charge = sign * count
        if abs(charge) > 15:
            raise SmilesError(f"invalid charge {charge:+d}", base + k - 1)

    if k < m and body[k] == ":":
        k += 1
        start = k
        while k < m and body[k].isdigit():
            k += 1
        if k == start:
            raise SmilesError("atom class needs digits", base + k)

    if k != m:
        raise SmilesError(f"trailing characters in bracket: {body[k:]!r}", base + k)

    return _AtomDraft(element, charge, aromatic, explicit_h, isotope)


def _implicit_h(element: str, aromatic: bool, orders: list[int]) -> int:
    """Hydrogen count a bare organic-subset atom implies in its bond context."""
    valences = _VALENCES.get(element)
    if valences is None:
        return 0
    if aromatic:
        # Aromatic bonds count one each plus a one-bond aromatic adjustment;
        # only the lowest valence applies to aromatic atoms.
        total = sum(1 if o == AROMATIC else o for o in orders) + 1
        return max(0, valences[0] - total)
    total = 0.0
    for o in orders:
        total += 1.5 if o == AROMATIC else o
    needed = int(total) if total == int(total) else int(total) + 1
    for v in valences:
        if v >= needed:
            return v - needed
    return 0


def _finish(drafts: list[_AtomDraft], raw_bonds: list[tuple[int, int, int]]) -> Molecule:
    incident: list[list[int]] = [[] for _ in drafts]
    for a, b, order in raw_bonds:
        incident[a].append(order)
        incident[b].append(order)
    atoms = []
    for idx, d in enumerate(drafts):
        h = d.explicit_h
        if h is None:
            h = _implicit_h(d.element, d.aromatic, incident[idx])
        atoms.append(Atom(d.element, d.charge, d.aromatic, h, d.isotope))
    bonds = [Bond(a, b, order) for a, b, order in raw_bonds]
    return Molecule(atoms, bonds)


# ---------------------------------------------------------------------------
# Canonical output
# ---------------------------------------------------------------------------


def write_canonical(mol: Molecule) -> str:
    """Deterministic canonical SMILES; identical for isomorphic molecules.

    Atoms are ranked by iterative neighborhood refinement starting from
    (element, aromatic, degree, H count, charge, isotope); remaining ties are
    broken by exploring the candidate individualizations and keeping the
    lexicographically smallest emitted string. Components are emitted
    independently and joined sorted, so fragment order never matters.
    """
    parts = [_canonical_component(mol, comp) for comp in mol.components()]
    parts.sort()
    return ".".join(parts)


def fragments(mol: Molecule) -> list[Molecule]:
    """Split a molecule into one :class:`Molecule` per connected component."""
    out = []
    for comp in mol.components():
        local = {g: i for i, g in enumerate(comp)}
        atoms = [mol.atoms[g] for g in comp]
        bonds = [
            Bond(local[b.a], local[b.b], b.order)
            for b in mol.bonds
            if b.a in local and b.b in local
        ]
        out.append(Molecule(atoms, bonds))
    return out


def _canonical_component(mol: Molecule, comp: list[int]) -> str:
    n = len(comp)
    if n == 1:
        atom = mol.atoms[comp[0]]
        return _atom_token(atom, _implicit_h(atom.element, atom.aromatic, []))

    local_of = {g: i for i, g in enumerate(comp)}
    # adjacency in local indices: (neighbor, order)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for i, g in enumerate(comp):
        for nbr, bidx in mol.neighbors[g]:
            adj[i].append((local_of[nbr], mol.bonds[bidx].order))
    for row in adj:
        row.sort()

    atoms = [mol.atoms[g] for g in comp]
    init_keys = [
        (a.element, a.aromatic, len(adj[i]), a.explicit_h, a.formal_charge,
         a.isotope or 0)
        for i, a in enumerate(atoms)
    ]
    ranks = _dense_ranks(init_keys)
    ranks = _refine(adj, ranks)

    implied = [
        _implicit_h(a.element, a.aromatic, [o for _, o in adj[i]])
        for i, a in enumerate(atoms)
    ]
    tokens = [_atom_token(a, implied[i]) for i, a in enumerate(atoms)]

    best: Optional[str] = None
    leaves = [_TIEBREAK_LEAF_BUDGET]

    def explore(rks: list[int]) -> None:
        nonlocal best
        counts: dict[int, int] = {}
        for r in rks:
            counts[r] = counts.get(r, 0) + 1
        tied = [r for r, c in counts.items() if c > 1]
        if not tied:
            s = _emit(adj, atoms, tokens, rks)
            if best is None or s < best:
                best = s
            leaves[0] -= 1
            return
        target = min(tied)
        members = [i for i in range(n) if rks[i] == target]
        if leaves[0] <= 0:
            # Exploration budget exhausted: by this point remaining ties are
            # almost surely automorphic, so one representative suffices.
            members = members[:1]
        for m in members:
            bumped = [r * 2 for r in rks]
            bumped[m] -= 1
            explore(_refine(adj, _dense_ranks_int(bumped)))

    explore(ranks)
    assert best is not None
    return best


def _dense_ranks(keys: list) -> list[int]:
    order = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _dense_ranks_int(keys: list[int]) -> list[int]:
    order = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _refine(adj: list[list[tuple[int, int]]], ranks: list[int]) -> list[int]:
    """Iterative neighborhood refinement until the partition stabilizes."""
    n = len(ranks)
    classes = len(set(ranks))
    if classes == n:
        return ranks
    while True:
        # Pack (rank, order) neighbor signatures into ints: cheap to sort.
        keys = []
        for i in range(n):
            sig = sorted(ranks[j] * 8 + order for j, order in adj[i])
            sig.insert(0, ranks[i])
            keys.append(tuple(sig))
        ranks = _dense_ranks(keys)
        new_classes = len(set(ranks))
        if new_classes in (classes, n):
            return ranks
        classes = new_classes


def _atom_token(atom: Atom, implied_h: int) -> str:
    symbol = atom.element.lower() if atom.aromatic else atom.element
    bare_ok = (
        atom.element in ORGANIC_SUBSET
        and atom.formal_charge == 0
        and atom.isotope is None
        and (not atom.aromatic or symbol in AROMATIC_ORGANIC)
        and atom.explicit_h == implied_h
    )
    if bare_ok:
        return symbol
    parts = ["["]
    if atom.isotope is not None:
        parts.append(str(atom.isotope))
    parts.append(symbol)
    if atom.explicit_h == 1:
        parts.append("H")
    elif atom.explicit_h > 1:
        parts.append(f"H{atom.explicit_h}")
    c = atom.formal_charge
    if c == 1:
        parts.append("+")
    elif c == -1:
        parts.append("-")
    elif c > 0:
        parts.append(f"+{c}")
    elif c < 0:
        parts.append(f"-{-c}")
    parts.append("]")
    return "".join(parts)


def _bond_token(order: int, a_aromatic: bool, b_aromatic: bool) -> str:
    both_aromatic = a_aromatic and b_aromatic
    if order == AROMATIC:
        return "" if both_aromatic else ":"
    if order == SINGLE:
        return "-" if both_aromatic else ""
    return "=" if order == DOUBLE else "#"


def _emit(adj, atoms, tokens, ranks: list[int]) -> str:
    """Emit the component SMILES for a discrete ranking.

    One DFS pass (neighbors in rank order) fixes the spanning tree and the
    ring-closure bonds; a simulation over the emission order assigns closure
    digits with reuse; the final recursive pass builds the string.
    """
    n = len(ranks)
    root = 0
    for i in range(1, n):
        if ranks[i] < ranks[root]:
            root = i

    order_of = [0] * n  # position in DFS preorder
    children: list[list[tuple[int, int]]] = [[] for _ in range(n)]  # (kid, order)
    ring_bonds: list[list[int]] = []  # [opener, closer, order, digit]
    seen_pair: set[int] = set()
    visited = [False] * n

    counter = 0
    stack = [(root, -1)]
    while stack:
        at, par = stack.pop()
        if visited[at]:
            continue
        visited[at] = True
        order_of[at] = counter
        counter += 1
        nbrs = sorted(adj[at], key=lambda t: ranks[t[0]])
        for k in range(len(nbrs) - 1, -1, -1):
            nbr, order = nbrs[k]
            if nbr == par:
                par = -2  # skip the tree edge exactly once (no multi-edges)
                continue
            if visited[nbr]:
                pair = at * n + nbr if at < nbr else nbr * n + at
                if pair not in seen_pair:
                    seen_pair.add(pair)
                    ring_bonds.append([nbr, at, order, 0])  # nbr visited first
            else:
                stack.append((nbr, at))

    # Tree children of i: later-preorder neighbors not joined by a ring bond.
    aromatic = [a.aromatic for a in atoms]
    is_ring_pair = {rb[0] * n + rb[1] for rb in ring_bonds} | {
        rb[1] * n + rb[0] for rb in ring_bonds
    }
    for i in range(n):
        kids = [
            (nbr, order)
            for nbr, order in adj[i]
            if order_of[nbr] > order_of[i] and nbr * n + i not in is_ring_pair
        ]
        kids.sort(key=lambda t: ranks[t[0]])
        children[i] = kids

    if ring_bonds:
        # Assign closure digits in emission order, reusing freed digits.
        opens: dict[int, list[list[int]]] = {}
        closes: dict[int, list[list[int]]] = {}
        for rb in ring_bonds:
            opens.setdefault(rb[0], []).append(rb)
            closes.setdefault(rb[1], []).append(rb)
        free: list[int] = []
        next_digit = 1
        for at in sorted(opens.keys() | closes.keys(), key=order_of.__getitem__):
            for rb in sorted(closes.get(at, ()), key=lambda rb: rb[3]):
                free.append(rb[3])
            free.sort()
            for rb in sorted(opens.get(at, ()), key=lambda rb: order_of[rb[1]]):
                if free:
                    rb[3] = free.pop(0)
                else:
                    rb[3] = next_digit
                    next_digit += 1
    else:
        opens = closes = {}

    out: list[str] = []
    append = out.append

    def emit_atom(at: int) -> None:
        append(tokens[at])
        if at in closes:
            for rb in sorted(closes[at], key=lambda rb: rb[3]):
                append(_bond_token(rb[2], aromatic[rb[0]], aromatic[at]))
                append(str(rb[3]) if rb[3] < 10 else f"%{rb[3]:02d}")
        if at in opens:
            for rb in sorted(opens[at], key=lambda rb: order_of[rb[1]]):
                append(_bond_token(rb[2], aromatic[at], aromatic[rb[1]]))
                append(str(rb[3]) if rb[3] < 10 else f"%{rb[3]:02d}")
        kids = children[at]
        last = len(kids) - 1
        for k, (kid, order) in enumerate(kids):
            if k < last:
                append("(")
                append(_bond_token(order, aromatic[at], aromatic[kid]))
                emit_atom(kid)
                append(")")
            else:
                append(_bond_token(order, aromatic[at], aromatic[kid]))
                emit_atom(kid)

    emit_atom(root)
    return "".join(out)
