"""Tanimoto-group-overlap node cost for starting-material guided search.

A node's reward against a set of enforced starting materials is the best
weighted blend of fingerprint Tanimoto similarity and fuzzy substructure
overlap across the set; the node cost is ``k * (1 - reward) + retro_cost``.
``c`` weights the fuzzy-substructure term, so ``c = 0`` is pure Tanimoto
guidance and ``c = 0.3`` weights the blend 0.7 / 0.3.

Rewards are memoized per (node canonical key, c): the same node gets
re-scored across many search iterations and the evaluation has to stay cheap.
All state is read-only after construction apart from the caches, whose dict
updates are atomic, so sharing across threads is safe.
"""

from __future__ import annotations

from dataclasses import dataclass

from .molgraph import Molecule, parse_smiles
from .simil import (
    DEFAULT_MCS_BUDGET,
    DEFAULT_RADIUS,
    DEFAULT_WIDTH,
    Fingerprint,
    fms,
    morgan_fingerprint,
    tanimoto,
)

DEFAULT_K = 25.0
DEFAULT_C = 0.3


@dataclass(frozen=True)
class TangoParams:
    """Guidance weights: ``k`` scales the whole term, ``c`` the fuzzy share."""

    k: float = DEFAULT_K
    c: float = DEFAULT_C

    def __post_init__(self):
        if self.k < 0:
            raise ValueError(f"k must be non-negative, got {self.k}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"c must lie in [0, 1], got {self.c}")


class StartingMaterialSet:
    """Enforced starting materials with precomputed fingerprints.

    Members are deduplicated by canonical key. Fingerprint geometry and the
    substructure-search budget are fixed at construction.
    """

    def __init__(
        self,
        molecules,
        radius: int = DEFAULT_RADIUS,
        width: int = DEFAULT_WIDTH,
        mcs_budget: int = DEFAULT_MCS_BUDGET,
    ):
        members: list[Molecule] = []
        seen: set[str] = set()
        for mol in molecules:
            if mol.canonical_key not in seen:
                seen.add(mol.canonical_key)
                members.append(mol)
        if not members:
            raise ValueError("starting-material set must not be empty")
        self.members: tuple[Molecule, ...] = tuple(members)
        self.keys: frozenset[str] = frozenset(seen)
        self.radius = radius
        self.width = width
        self.mcs_budget = mcs_budget
        self.fingerprints: tuple[Fingerprint, ...] = tuple(
            morgan_fingerprint(m, radius, width) for m in members
        )
        self._node_fps: dict[str, Fingerprint] = {}
        self._rewards: dict[tuple[str, float], float] = {}

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, key: str) -> bool:
        return key in self.keys

    def node_fingerprint(self, node: Molecule) -> Fingerprint:
        fp = self._node_fps.get(node.canonical_key)
        if fp is None:
            fp = morgan_fingerprint(node, self.radius, self.width)
            self._node_fps[node.canonical_key] = fp
        return fp


def tango_reward(node: Molecule, sms: StartingMaterialSet, params: TangoParams) -> float:
    """Best blended similarity of ``node`` to any enforced starting material.

    Returns ``max over sm of (1 - c) * tanimoto(node, sm) + c * fms(node, sm)``,
    a value in [0, 1] that hits 1.0 when the node is one of the materials.
    """
    cache_key = (node.canonical_key, params.c)
    cached = sms._rewards.get(cache_key)
    if cached is not None:
        return cached
    c = params.c
    node_fp = sms.node_fingerprint(node)
    best = 0.0
    for sm, sm_fp in zip(sms.members, sms.fingerprints):
        score = 0.0
        if c < 1.0:
            score += (1.0 - c) * tanimoto(node_fp, sm_fp)
        if c > 0.0:
            score += c * fms(node, sm, sms.mcs_budget)
        if score > best:
            best = score
    sms._rewards[cache_key] = best
    return best


def tango_node_cost(
    node: Molecule,
    sms: StartingMaterialSet,
    params: TangoParams,
    retro_cost: float,
) -> float:
    """Node cost ``k * (1 - reward) + retro_cost``.

    Equals ``retro_cost`` exactly when the node matches an enforced starting
    material, and never falls below it.
    """
    if retro_cost < 0:
        raise ValueError(f"retro_cost must be non-negative, got {retro_cost}")
    if params.k == 0.0:
        return retro_cost
    return params.k * (1.0 - tango_reward(node, sms, params)) + retro_cost


class ConstantValue:
    """Value oracle returning a fixed estimate for every molecule."""

    def __init__(self, value: float = 0.0):
        if value < 0:
            raise ValueError("value estimates must be non-negative")
        self.value = value

    def __call__(self, mol: Molecule) -> float:
        return self.value


class TableValue:
    """Value oracle backed by a canonical-SMILES table, with a fallback.

    Lookup misses fall back to a constant (default 0).
    """

    def __init__(self, table: dict[str, float], fallback: float = 0.0):
        self.table = dict(table)
        self.fallback = fallback

    @classmethod
    def from_file(cls, path, fallback: float = 0.0) -> "TableValue":
        """Load ``smiles<TAB>cost`` lines; keys are re-canonicalized."""
        table: dict[str, float] = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                smiles, _, cost = line.partition("\t")
                table[parse_smiles(smiles).canonical_key] = float(cost)
        return cls(table, fallback)

    def __call__(self, mol: Molecule) -> float:
        return self.table.get(mol.canonical_key, self.fallback)
