"""Best-first AND-OR search over retrosynthetic disconnections.

Molecule nodes (OR) are solved by any one child reaction; reaction nodes
(AND) need every precursor solved. Each molecule node carries ``rn``, the
estimated minimal cost of making it, and ``v_t``, the estimated minimal cost
of making the root through it; the frontier node with the lowest ``v_t`` is
expanded next. After every expansion the reaction numbers are propagated
upward to the ancestors and ``v_t`` is rebuilt top-down, so both quantities
always match what a from-scratch recomputation over the graph would give.

The graph is single-writer: one search loop owns it, and runs are
deterministic for a given policy, inventory and configuration.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

from .molgraph import Molecule
from .tango import ConstantValue, StartingMaterialSet, TangoParams, tango_node_cost

# States of a molecule node.
FRONTIER = "frontier"
EXPANDED = "expanded"
PURCHASABLE = "purchasable"
DEAD = "dead"

# Large finite stand-in for "unsolvable": keeps reaction-number sums defined.
DEAD_RN = 1e15

# Reaction costs are -ln(policy probability), clamped to this range.
MIN_REACTION_COST = 0.001
MAX_REACTION_COST = 10.0


@dataclass
class MoleculeNode:
    idx: int
    mol: Molecule
    rn: float
    v_t: float = 0.0
    state: str = FRONTIER
    parent_reactions: list[int] = field(default_factory=list)
    child_reactions: list[int] = field(default_factory=list)
    solved: bool = False
    sm_solved: bool = False  # solvable with the enforced material as a leaf

    @property
    def key(self) -> str:
        return self.mol.canonical_key


@dataclass
class ReactionNode:
    idx: int
    cost: float
    parent: int
    children: list[int]
    precursor_keys: list[str]  # all precursors, including cycle-blocked ones
    rn: float = 0.0
    v_t: float = 0.0
    blocked: bool = False  # cycle guard tripped: pinned unsolvable
    solved: bool = False
    sm_solved: bool = False


class SearchGraph:
    """Bipartite molecule/reaction graph with canonical-key deduplication."""

    def __init__(self, target: Molecule, enforced_sm_key: Optional[str] = None):
        self.nodes: list[MoleculeNode] = []
        self.reactions: list[ReactionNode] = []
        self.by_key: dict[str, int] = {}
        self.enforced_sm_key = enforced_sm_key
        self.root = self._add_molecule(target, rn=0.0)

    def _add_molecule(self, mol: Molecule, rn: float) -> int:
        idx = len(self.nodes)
        node = MoleculeNode(idx=idx, mol=mol, rn=rn, v_t=rn)
        self.nodes.append(node)
        self.by_key[mol.canonical_key] = idx
        return idx

    def node_for(self, key: str) -> Optional[MoleculeNode]:
        idx = self.by_key.get(key)
        return None if idx is None else self.nodes[idx]

    def ancestor_keys(self, node_id: int) -> set[str]:
        """Canonical keys of ``node_id`` and every graph ancestor of it."""
        seen_nodes = {node_id}
        keys = {self.nodes[node_id].key}
        stack = [node_id]
        while stack:
            nid = stack.pop()
            for rid in self.nodes[nid].parent_reactions:
                parent = self.reactions[rid].parent
                if parent not in seen_nodes:
                    seen_nodes.add(parent)
                    keys.add(self.nodes[parent].key)
                    stack.append(parent)
        return keys

    def frontier_ids(self) -> list[int]:
        return [n.idx for n in self.nodes if n.state == FRONTIER]


@dataclass(frozen=True)
class SearchConfig:
    """Search knobs. ``exhaustive`` keeps expanding after the first solution,
    which turns the final graph into the full reachable reaction space."""

    expansion_budget: int = 100
    top_n: int = 50
    tango: TangoParams = field(default_factory=TangoParams)
    constrained: bool = True
    exhaustive: bool = False

    def __post_init__(self):
        if self.expansion_budget < 1:
            raise ValueError("expansion_budget must be at least 1")
        if self.top_n < 1:
            raise ValueError("top_n must be at least 1")


@dataclass(frozen=True)
class RouteNode:
    smiles: str
    purchasable: bool
    is_enforced_sm: bool


@dataclass(frozen=True)
class RouteStep:
    parent: str
    children: tuple[str, ...]
    cost: float


@dataclass(frozen=True)
class Route:
    """A reaction tree: ``steps`` in preorder from the target."""

    steps: tuple[RouteStep, ...]
    nodes: tuple[RouteNode, ...]
    total_cost: float

    @property
    def length(self) -> int:
        return len(self.steps)

    @property
    def leaves(self) -> tuple[str, ...]:
        parents = {s.parent for s in self.steps}
        return tuple(n.smiles for n in self.nodes if n.smiles not in parents)


@dataclass
class SearchResult:
    solved: bool
    route: Optional[Route]
    expansions_used: int
    wall_time: float

    def __post_init__(self):
        if self.solved and self.route is None:
            raise ValueError("a solved result must carry a route")


def select_frontier(g: SearchGraph) -> Optional[int]:
    """Frontier node with minimal ``v_t``; insertion order breaks ties.

    Returns ``None`` when the frontier is empty (search exhausted).
    """
    best: Optional[int] = None
    best_vt = math.inf
    for node in g.nodes:
        if node.state == FRONTIER and node.v_t < best_vt:
            best = node.idx
            best_vt = node.v_t
    return best


def reaction_cost(probability: float) -> float:
    """Clamped negative log-likelihood of a policy suggestion."""
    if probability <= 0.0:
        return MAX_REACTION_COST
    return min(max(-math.log(probability), MIN_REACTION_COST), MAX_REACTION_COST)


def expand(
    g: SearchGraph,
    node_id: int,
    policy,
    inventory,
    cost_fn: Callable[[Molecule], float],
    top_n: int = 50,
) -> int:
    """Expand a frontier node with one policy call; returns new node count.

    Creates one reaction node per precursor set, with cost ``-ln(p)`` clamped
    to [0.001, 10]. Precursors are deduplicated against the graph by canonical
    key; fresh nodes start with ``rn = cost_fn(mol)`` unless they are found in
    the inventory or match the enforced starting material, in which case they
    are purchasable with ``rn = 0``. A precursor identical to an ancestor of
    the expanded node leaves its reaction in the graph but pinned unsolvable,
    preventing cycles. A node the policy cannot expand becomes dead.
    """
    node = g.nodes[node_id]
    if node.state != FRONTIER:
        raise ValueError(f"node {node_id} is not on the frontier")

    candidates = policy.expand_one_step(node.mol, top_n)
    if not candidates:
        node.state = DEAD
        node.rn = DEAD_RN
        return 0

    ancestors = g.ancestor_keys(node_id)
    created = 0
    for cand in candidates[:top_n]:
        rid = len(g.reactions)
        cost = reaction_cost(cand.probability)
        child_ids: list[int] = []
        precursor_keys: list[str] = []
        blocked = False
        for prec in cand.precursors:
            key = prec.canonical_key
            precursor_keys.append(key)
            if key in ancestors:
                blocked = True  # linked, but never solvable from here
                continue
            existing = g.by_key.get(key)
            if existing is None:
                if key in inventory:
                    cid = g._add_molecule(prec, rn=0.0)
                    child = g.nodes[cid]
                    child.state = PURCHASABLE
                    child.solved = True
                    child.sm_solved = key == g.enforced_sm_key
                else:
                    cid = g._add_molecule(prec, rn=cost_fn(prec))
                created += 1
            else:
                cid = existing
            if cid not in child_ids:
                child_ids.append(cid)
        reaction = ReactionNode(
            idx=rid,
            cost=cost,
            parent=node_id,
            children=child_ids,
            precursor_keys=precursor_keys,
            blocked=blocked,
        )
        if blocked:
            reaction.rn = DEAD_RN
        else:
            reaction.rn = cost + sum(g.nodes[c].rn for c in child_ids)
            reaction.solved = all(g.nodes[c].solved for c in child_ids)
            reaction.sm_solved = reaction.solved and any(
                g.nodes[c].sm_solved for c in child_ids
            )
        g.reactions.append(reaction)
        node.child_reactions.append(rid)
        for cid in child_ids:
            g.nodes[cid].parent_reactions.append(rid)
    node.state = EXPANDED
    return created


def update(g: SearchGraph, from_id: int) -> None:
    """Propagate reaction numbers upward, then rebuild ``v_t`` top-down.

    Reaction nodes take the sum of their children's reaction numbers plus the
    reaction cost; molecule nodes take the minimum over their child reactions.
    ``v_t`` starts from the root (where it equals ``rn``), moves through a
    reaction as ``rn(R) - rn(parent) + v_t(parent)`` and reaches a molecule as
    the minimum over its parent reactions. Afterwards every node holds exactly
    the values a whole-graph recomputation would produce.
    """
    worklist = [from_id]
    while worklist:
        nid = worklist.pop()
        node = g.nodes[nid]
        changed = False
        if node.state == EXPANDED:
            new_rn = DEAD_RN
            new_solved = False
            new_sm = False
            for rid in node.child_reactions:
                r = g.reactions[rid]
                if r.rn < new_rn:
                    new_rn = r.rn
                new_solved = new_solved or r.solved
                new_sm = new_sm or r.sm_solved
            if new_rn != node.rn or new_solved != node.solved or new_sm != node.sm_solved:
                node.rn = new_rn
                node.solved = new_solved
                node.sm_solved = new_sm
                changed = True
        elif node.state == DEAD:
            changed = node.rn != DEAD_RN
            node.rn = DEAD_RN
        else:
            changed = True  # state flip (fresh expansion target) or leaf init
        if not changed and nid != from_id:
            continue
        for rid in node.parent_reactions:
            r = g.reactions[rid]
            if r.blocked:
                continue
            r.rn = r.cost + sum(g.nodes[c].rn for c in r.children)
            r.solved = all(g.nodes[c].solved for c in r.children)
            r.sm_solved = r.solved and any(g.nodes[c].sm_solved for c in r.children)
            parent = r.parent
            if parent not in worklist:
                worklist.append(parent)

    _recompute_vt(g)


def _recompute_vt(g: SearchGraph) -> None:
    """Top-down ``v_t`` pass in topological order from the root."""
    root = g.nodes[g.root]
    root.v_t = root.rn
    pending_parents = [len(n.parent_reactions) for n in g.nodes]
    best_vt = [math.inf] * len(g.nodes)
    stack = [g.root]
    while stack:
        nid = stack.pop()
        node = g.nodes[nid]
        if nid != g.root:
            node.v_t = best_vt[nid]
        for rid in node.child_reactions:
            r = g.reactions[rid]
            r.v_t = r.rn - node.rn + node.v_t
            for cid in r.children:
                if r.v_t < best_vt[cid]:
                    best_vt[cid] = r.v_t
                pending_parents[cid] -= 1
                if pending_parents[cid] == 0:
                    stack.append(cid)


def run_search(
    target: Molecule,
    sm: Molecule,
    policy,
    inventory=None,
    config: Optional[SearchConfig] = None,
    value_fn: Optional[Callable[[Molecule], float]] = None,
) -> SearchResult:
    """Select/expand/update loop until solved, budget spent, or exhausted.

    The enforced starting material is always treated as purchasable. In
    constrained mode success requires a route whose leaves are purchasable
    with the starting material among them, and the search keeps going past
    unconstrained solutions until that happens or the budget runs out.
    """
    config = config or SearchConfig()
    value_fn = value_fn or ConstantValue(0.0)
    inventory = inventory if inventory is not None else frozenset()
    sm_key = sm.canonical_key
    buyable = _WithExtra(inventory, sm_key)

    if config.constrained:
        sms = StartingMaterialSet([sm])
        params = config.tango

        def cost_fn(mol: Molecule) -> float:
            return tango_node_cost(mol, sms, params, value_fn(mol))

    else:
        cost_fn = value_fn

    started = time.perf_counter()
    g = SearchGraph(target, enforced_sm_key=sm_key)
    root = g.nodes[g.root]

    trivially_solved = target.canonical_key == sm_key or (
        not config.constrained and target.canonical_key in buyable
    )
    if trivially_solved:
        root.state = PURCHASABLE
        root.rn = 0.0
        root.solved = True
        root.sm_solved = target.canonical_key == sm_key
        route = extract_route(g, config.constrained, sm)
        return SearchResult(True, route, 0, time.perf_counter() - started)

    root.rn = cost_fn(target)
    root.v_t = root.rn

    expansions = 0
    while expansions < config.expansion_budget:
        node_id = select_frontier(g)
        if node_id is None:
            break
        expand(g, node_id, policy, buyable, cost_fn, config.top_n)
        expansions += 1
        update(g, node_id)
        solved = root.sm_solved if config.constrained else root.solved
        if solved and not config.exhaustive:
            break

    solved = root.sm_solved if config.constrained else root.solved
    route = extract_route(g, config.constrained, sm) if solved else None
    return SearchResult(
        solved=solved and route is not None,
        route=route,
        expansions_used=expansions,
        wall_time=time.perf_counter() - started,
    )


class _WithExtra:
    """Membership view over an inventory plus the enforced material."""

    __slots__ = ("base", "extra")

    def __init__(self, base, extra: str):
        self.base = base
        self.extra = extra

    def __contains__(self, key: str) -> bool:
        return key == self.extra or key in self.base


def extract_route(
    g: SearchGraph, constrained: bool, sm: Molecule
) -> Optional[Route]:
    """Minimum-cost solved reaction tree under the root.

    For every solved molecule the child reaction minimizing the accumulated
    cost is chosen; with ``constrained`` the tree must contain the enforced
    starting material as a leaf, even when a cheaper tree without it exists.
    Returns ``None`` if no qualifying tree exists.
    """
    sm_key = sm.canonical_key
    root = g.nodes[g.root]

    # Root identical to the enforced material: the empty route qualifies.
    if root.state == PURCHASABLE:
        ok = root.key == sm_key if constrained else True
        if not ok:
            return None
        node = RouteNode(root.key, True, root.key == sm_key)
        return Route(steps=(), nodes=(node,), total_cost=0.0)

    INF = math.inf
    memo: dict[int, tuple[float, float, Optional[int], Optional[int]]] = {}

    def solve(nid: int) -> tuple[float, float, Optional[int], Optional[int]]:
        """Returns (cost, cost_with_sm, best_rid, best_rid_with_sm)."""
        got = memo.get(nid)
        if got is not None:
            return got
        node = g.nodes[nid]
        if node.state == PURCHASABLE:
            res = (0.0, 0.0 if node.key == sm_key else INF, None, None)
            memo[nid] = res
            return res
        best = (INF, INF, None, None)
        best_cost, best_sm_cost, best_rid, best_sm_rid = best
        for rid in node.child_reactions:
            r = g.reactions[rid]
            if r.blocked or not r.solved:
                continue
            total = r.cost
            cheapest_upgrade = INF  # extra cost of routing sm through a child
            for cid in r.children:
                c_cost, c_sm_cost, _, _ = solve(cid)
                total += c_cost
                upgrade = c_sm_cost - c_cost
                if upgrade < cheapest_upgrade:
                    cheapest_upgrade = upgrade
            if total < best_cost:
                best_cost, best_rid = total, rid
            sm_total = total + cheapest_upgrade
            if sm_total < best_sm_cost:
                best_sm_cost, best_sm_rid = sm_total, rid
        res = (best_cost, best_sm_cost, best_rid, best_sm_rid)
        memo[nid] = res
        return res

    cost, sm_cost, rid, sm_rid = solve(g.root)
    need_sm = constrained
    if need_sm and (sm_rid is None or sm_cost == INF):
        return None
    if not need_sm and (rid is None or cost == INF):
        return None

    steps: list[RouteStep] = []
    seen_nodes: dict[str, RouteNode] = {}

    def build(nid: int, want_sm: bool) -> None:
        node = g.nodes[nid]
        if node.state == PURCHASABLE:
            seen_nodes[node.key] = RouteNode(node.key, True, node.key == sm_key)
            return
        seen_nodes.setdefault(node.key, RouteNode(node.key, False, node.key == sm_key))
        _, _, best_rid, best_sm_rid = memo[nid]
        chosen = best_sm_rid if want_sm else best_rid
        r = g.reactions[chosen]
        steps.append(
            RouteStep(
                parent=node.key,
                children=tuple(g.nodes[c].key for c in r.children),
                cost=r.cost,
            )
        )
        carrier: Optional[int] = None
        if want_sm:
            carrier_upgrade = INF
            for cid in r.children:
                c_cost, c_sm_cost, _, _ = solve(cid)
                if c_sm_cost - c_cost < carrier_upgrade:
                    carrier_upgrade = c_sm_cost - c_cost
                    carrier = cid
        for cid in r.children:
            build(cid, want_sm and cid == carrier)

    build(g.root, need_sm)
    total = sm_cost if need_sm else cost
    return Route(steps=tuple(steps), nodes=tuple(seen_nodes.values()), total_cost=total)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def result_to_json(
    result: SearchResult, config: Optional[SearchConfig] = None
) -> str:
    doc = {
        "solved": result.solved,
        "expansions_used": result.expansions_used,
        "wall_time": result.wall_time,
        "config": asdict(config) if config is not None else None,
        "route": None,
    }
    if result.route is not None:
        doc["route"] = {
            "length": result.route.length,
            "total_cost": result.route.total_cost,
            "nodes": [asdict(n) for n in result.route.nodes],
            "reactions": [
                {"parent": s.parent, "children": list(s.children), "cost": s.cost}
                for s in result.route.steps
            ],
        }
    return json.dumps(doc, indent=2)


def route_to_dot(route: Route) -> str:
    """GraphViz rendering of a route: molecules as boxes, reactions as dots."""
    lines = ["digraph route {", "  rankdir=TB;", "  node [fontsize=10];"]
    ids = {n.smiles: f"m{i}" for i, n in enumerate(route.nodes)}
    for n in route.nodes:
        style = []
        if n.is_enforced_sm:
            style.append("color=red")
        if n.purchasable:
            style.append("style=filled, fillcolor=lightgrey")
        attr = (", " + ", ".join(style)) if style else ""
        lines.append(f'  {ids[n.smiles]} [shape=box, label="{n.smiles}"{attr}];')
    for i, step in enumerate(route.steps):
        rid = f"r{i}"
        lines.append(f'  {rid} [shape=point, label="", width=0.08];')
        lines.append(f'  {ids[step.parent]} -> {rid} [label="{step.cost:.3f}"];')
        for child in step.children:
            lines.append(f"  {rid} -> {ids[child]};")
    lines.append("}")
    return "\n".join(lines)
