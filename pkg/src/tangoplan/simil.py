"""Molecular similarity: circular fingerprints, Tanimoto, and fuzzy
substructure overlap.

Fingerprints hash iterated atom environments with a fixed 64-bit FNV mix, so
bit patterns are identical across runs and platforms. Duplicate environments
(same atoms and bonds reached from different centers or radii) set one bit
only, in line with common circular-fingerprint practice. The fuzzy score is
the Tanimoto-style atom overlap of an approximate maximum common induced
connected subgraph found by budgeted backtracking.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .molgraph import ELEMENTS, Molecule, parse_smiles

DEFAULT_RADIUS = 2
DEFAULT_WIDTH = 2048
DEFAULT_MCS_BUDGET = 10_000

_ELEMENT_CODE = {sym: i for i, sym in enumerate(sorted(ELEMENTS))}

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def _mix(values) -> int:
    """Order-sensitive 64-bit FNV-1a over a sequence of small ints."""
    h = _FNV_OFFSET
    for v in values:
        v &= _MASK64
        h = ((h ^ (v & 0xFFFFFFFF)) * _FNV_PRIME) & _MASK64
        h = ((h ^ (v >> 32)) * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class Fingerprint:
    """Fixed-width bit vector of hashed circular atom environments."""

    bits: int
    width: int
    radius: int

    def popcount(self) -> int:
        return self.bits.bit_count()


def morgan_fingerprint(
    mol: Molecule, radius: int = DEFAULT_RADIUS, width: int = DEFAULT_WIDTH
) -> Fingerprint:
    """Hash circular environments of every atom for radii ``0..radius``.

    Environments covering the same atoms and bonds are counted once (the
    lowest radius wins, ties by lowest hash value).
    """
    if radius < 0:
        raise ValueError("radius must be non-negative")
    if width < 64 or width & (width - 1):
        raise ValueError("width must be a power of two, at least 64")

    n = mol.atom_count
    inv = []
    for i, a in enumerate(mol.atoms):
        inv.append(
            _mix(
                (
                    _ELEMENT_CODE[a.element],
                    a.formal_charge,
                    int(a.aromatic),
                    a.explicit_h,
                    len(mol.neighbors[i]),
                    a.isotope or 0,
                )
            )
        )

    # feature identity -> (radius, hash); identity is the covered substructure
    kept: dict[tuple[frozenset, frozenset], tuple[int, int]] = {}
    for i in range(n):
        kept[(frozenset((i,)), frozenset())] = (0, inv[i])

    env_bonds: list[set[int]] = [set() for _ in range(n)]
    frontier: list[set[int]] = [{i} for i in range(n)]
    for r in range(1, radius + 1):
        new_inv = []
        for i in range(n):
            pairs = sorted(
                (mol.bonds[bidx].order, inv[j]) for j, bidx in mol.neighbors[i]
            )
            flat = [r, inv[i]]
            for order, h in pairs:
                flat.append(order)
                flat.append(h)
            new_inv.append(_mix(flat))
        inv = new_inv
        for i in range(n):
            # grow the environment of center i by one shell
            nxt: set[int] = set()
            for at in frontier[i]:
                for nbr, bidx in mol.neighbors[at]:
                    if bidx not in env_bonds[i]:
                        env_bonds[i].add(bidx)
                        nxt.add(nbr)
            frontier[i] = nxt
            bonds_key = frozenset(env_bonds[i])
            atoms_key = frozenset(
                {i}
                | {mol.bonds[b].a for b in bonds_key}
                | {mol.bonds[b].b for b in bonds_key}
            )
            key = (atoms_key, bonds_key)
            prev = kept.get(key)
            if prev is None:
                kept[key] = (r, inv[i])
            elif prev[0] == r and inv[i] < prev[1]:
                kept[key] = (r, inv[i])

    bits = 0
    for _, h in kept.values():
        bits |= 1 << (h % width)
    return Fingerprint(bits, width, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """Bit-set Tanimoto similarity: |a AND b| / |a OR b|, in [0, 1]."""
    if a.width != b.width:
        raise ValueError(f"fingerprint widths differ: {a.width} vs {b.width}")
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union


# ---------------------------------------------------------------------------
# Approximate maximum common induced connected subgraph
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _matching_form(key: str) -> Molecule:
    # Reparsing the canonical key gives a stable atom order, so budgeted
    # searches explore identically however the caller's molecule was numbered.
    return parse_smiles(key)


class _Exhausted(Exception):
    pass


def mcs_atoms(a: Molecule, b: Molecule, budget: int = DEFAULT_MCS_BUDGET) -> int:
    """Atom count of an approximate maximum common connected subgraph.

    Matching is induced: atoms pair by (element, aromatic) label, bonds must
    agree exactly in order, and non-bonds must map to non-bonds. Backtracking
    stops after ``budget`` extension attempts and returns the best size found,
    always a lower bound on the exact answer and never above min(|a|, |b|).
    """
    ka, kb = a.canonical_key, b.canonical_key
    if ka == kb:
        return a.atom_count  # isomorphic: the exact answer is the whole graph
    if kb < ka:
        ka, kb = kb, ka
    a, b = _matching_form(ka), _matching_form(kb)

    la = [(at.element, at.aromatic) for at in a.atoms]
    lb = [(at.element, at.aromatic) for at in b.atoms]
    adj_a = [
        {j: a.bonds[bi].order for j, bi in a.neighbors[i]} for i in range(a.atom_count)
    ]
    adj_b = [
        {j: b.bonds[bi].order for j, bi in b.neighbors[i]} for i in range(b.atom_count)
    ]
    upper = min(a.atom_count, b.atom_count)

    best = 0
    steps_left = budget

    def compatible(u: int, v: int, mapping: dict[int, int]) -> bool:
        row = adj_a[u]
        vrow = adj_b[v]
        for w, x in mapping.items():
            order = row.get(w)
            if order is None:
                if x in vrow:
                    return False
            elif vrow.get(x) != order:
                return False
        return True

    def extend(mapping: dict[int, int], mapped_b: set[int], banned: set[int]) -> None:
        nonlocal best, steps_left
        if len(mapping) > best:
            best = len(mapping)
            if best == upper:
                raise _Exhausted
        # frontier atoms of A: unmapped, not banned, adjacent to the mapping
        frontier = set()
        for u in mapping:
            for w in adj_a[u]:
                if w not in mapping and w not in banned:
                    frontier.add(w)
        if not frontier:
            return
        remaining_a = a.atom_count - len(mapping) - len(banned)
        if len(mapping) + min(remaining_a, b.atom_count - len(mapped_b)) <= best:
            return
        u = min(frontier)
        for v in range(b.atom_count):
            if v in mapped_b or lb[v] != la[u]:
                continue
            steps_left -= 1
            if steps_left < 0:
                raise _Exhausted
            if not compatible(u, v, mapping):
                continue
            mapping[u] = v
            mapped_b.add(v)
            extend(mapping, mapped_b, banned)
            del mapping[u]
            mapped_b.remove(v)
        banned.add(u)
        extend(mapping, mapped_b, banned)
        banned.remove(u)

    try:
        for i in range(a.atom_count):
            # Mappings touching an earlier seed atom were already enumerated,
            # so ban the prefix instead of re-exploring it.
            for j in range(b.atom_count):
                if la[i] != lb[j]:
                    continue
                steps_left -= 1
                if steps_left < 0:
                    raise _Exhausted
                extend({i: j}, {j}, set(range(i)))
    except _Exhausted:
        pass
    return best


def fms(a: Molecule, b: Molecule, budget: int = DEFAULT_MCS_BUDGET) -> float:
    """Fuzzy substructure overlap: mcs / (|a| + |b| - mcs), in [0, 1].

    Reaches 1.0 exactly when the common subgraph covers both molecules, i.e.
    they are isomorphic (given the search was exact).
    """
    common = mcs_atoms(a, b, budget)
    return common / (a.atom_count + b.atom_count - common)
