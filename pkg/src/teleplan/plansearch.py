"""Minimum-EPR-cost teleportation plans.

Three search engines share one plan model:

* :func:`p1` -- exact subset DP over rooted delivery trees on whole parties.
* :func:`route_search` -- uniform-cost search over cell placements, used by
  :func:`p2` (prime-dimensional cells) and :func:`p3` (cells after local
  isometry embeddings).
* :func:`p1_oracle` / :func:`naive_cost` -- brute-force tree enumeration and
  the star baseline.

Every step costs the entropy (ebits) of the moved cells in the original
state, which is what compressing and teleporting many copies consumes.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

from . import statekit as sk
from .errors import DimensionLimitError, SearchBudgetExceeded, StateError
from .statekit import CutEntropyTable, IsometrySpec, StateTensor

EXTERNAL = -1  # location index of an off-party starting laboratory


@dataclass(frozen=True)
class Cell:
    factors: tuple[int, ...]
    dim: int
    owner: int
    name: str


@dataclass(frozen=True)
class CellLayout:
    """Partition of a state's factors into routing units.

    ``factor_dims`` are the dimensions the factor indices refer to; a layout
    may refine the native factors of a state (a reshape, no basis change).
    """

    cells: tuple[Cell, ...]
    factor_dims: tuple[int, ...]
    derivation: str

    def __post_init__(self):
        flat = sorted(f for c in self.cells for f in c.factors)
        if flat != list(range(len(self.factor_dims))):
            raise StateError("every factor must appear in exactly one cell")
        for c in self.cells:
            if math.prod(self.factor_dims[f] for f in c.factors) != c.dim:
                raise StateError(f"cell {c.name} dimension does not match its factors")
        if self.derivation == "prime-split" and not all(_is_prime(c.dim) for c in self.cells):
            raise StateError("prime-split layout contains a composite cell")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.cells)

    def owned_mask(self, party: int) -> int:
        return sum(1 << i for i, c in enumerate(self.cells) if c.owner == party)


@dataclass(frozen=True)
class SearchConfig:
    tol: float = 1e-9
    tie_break: str = "lexicographic"
    prune: bool = False
    max_cells: int = 12
    workers: int = 1
    max_parties: int = 16
    oracle_max_parties: int = 7
    max_expanded: int = 10**7
    max_frontier: int = 2 * 10**7

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.tie_break != "lexicographic":
            raise ValueError(f"unsupported tie-break rule {self.tie_break!r}")


@dataclass(frozen=True)
class TeleportStep:
    moved: tuple[int, ...]  # cell indices into the plan's layout
    source: int
    dest: int
    cost: float


@dataclass(frozen=True, eq=False)
class TeleportPlan:
    protocol: str
    root: int | None  # None when the search started from an explicit placement
    steps: tuple[TeleportStep, ...]
    total: float
    layout: CellLayout
    state: StateTensor = field(repr=False)
    table: CutEntropyTable | None = field(default=None, repr=False)

    def party_name(self, p: int | None) -> str | None:
        if p is None:
            return None
        return "external" if p == EXTERNAL else self.state.party_names[p]

    def describe(self) -> list[str]:
        names = self.layout.names
        return [
            f"{{{','.join(names[i] for i in s.moved)}}} {self.party_name(s.source)} -> "
            f"{self.party_name(s.dest)}  {s.cost:.9f}"
            for s in self.steps
        ]


# ---------------------------------------------------------------------------
# Layouts
# ---------------------------------------------------------------------------


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, math.isqrt(n) + 1))


def prime_factors(n: int) -> list[int]:
    """Prime factors in ascending order, with multiplicity."""
    out, p = [], 2
    while p * p <= n:
        while n % p == 0:
            out.append(p)
            n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def _cell_names(state: StateTensor, owners: Sequence[int]) -> list[str]:
    counts = [0] * state.num_parties
    names = []
    for p in owners:
        counts[p] += 1
        names.append(f"{state.party_names[p]}{counts[p]}")
    return names


def party_layout(state: StateTensor) -> CellLayout:
    """One cell per party holding all of its factors."""
    cells = tuple(
        Cell(state.party_factors(p), state.party_dim(p), p, state.party_names[p])
        for p in range(state.num_parties)
    )
    return CellLayout(cells, state.factor_dims, "party")


def native_layout(state: StateTensor) -> CellLayout:
    names = _cell_names(state, state.owner)
    cells = tuple(Cell((f,), d, state.owner[f], names[f]) for f, d in enumerate(state.factor_dims))
    return CellLayout(cells, state.factor_dims, "native factors")


def prime_split(state: StateTensor, *, derivation: str = "prime-split") -> CellLayout:
    """Split composite factors into prime cells, most significant digit first."""
    dims: list[int] = []
    owners: list[int] = []
    for d, p in zip(state.factor_dims, state.owner):
        for q in prime_factors(d):
            dims.append(q)
            owners.append(p)
    names = _cell_names(state, owners)
    cells = tuple(Cell((i,), d, p, nm) for i, (d, p, nm) in enumerate(zip(dims, owners, names)))
    return CellLayout(cells, tuple(dims), derivation)


def layout_state(state: StateTensor, layout: CellLayout) -> StateTensor:
    """The state re-expressed over ``layout.factor_dims`` (pure reshape)."""
    if layout.factor_dims == state.factor_dims:
        return state
    if math.prod(layout.factor_dims) != state.total_dim:
        raise StateError("layout dimensions do not match the state")
    owner = [0] * len(layout.factor_dims)
    for c in layout.cells:
        for f in c.factors:
            owner[f] = c.owner
    # the refinement must nest inside the native factors with the same owners
    i = 0
    for d, p in zip(state.factor_dims, state.owner):
        acc = 1
        while acc < d:
            if i >= len(owner) or owner[i] != p:
                raise StateError("layout does not refine the state's factors")
            acc *= layout.factor_dims[i]
            i += 1
        if acc != d:
            raise StateError("layout does not refine the state's factors")
    return sk.make_state(layout.factor_dims, owner, state.amplitudes, party_names=state.party_names)


def layout_table(state: StateTensor, layout: CellLayout, config: SearchConfig) -> CutEntropyTable:
    refined = layout_state(state, layout)
    return sk.cut_entropy_table(refined, [c.factors for c in layout.cells],
                                unit_names=layout.names, max_units=max(config.max_cells, 1),
                                workers=config.workers)


# ---------------------------------------------------------------------------
# P1: subset dynamic programming over rooted delivery trees
# ---------------------------------------------------------------------------

_PARENT = -2  # placeholder source for the first step of a subtree bundle


def _better(cost_a: float, key_a: tuple, cost_b: float, key_b: tuple, tol: float) -> bool:
    if cost_a < cost_b - tol:
        return True
    if cost_a > cost_b + tol:
        return False
    return key_a < key_b


def _bits(mask: int) -> tuple[int, ...]:
    return tuple(i for i in range(mask.bit_length()) if mask >> i & 1)


def _fill_parent(steps: tuple, parent: int) -> tuple:
    return tuple((m, parent if s == _PARENT else s, d) for m, s, d in steps)


def _party_table(state: StateTensor, config: SearchConfig) -> CutEntropyTable:
    if state.num_parties > config.max_parties:
        raise DimensionLimitError(
            f"{state.num_parties} parties exceeds the limit of {config.max_parties}")
    return sk.cut_entropy_table(state, "party", max_units=config.max_parties, workers=config.workers)


def _plan_from_keys(protocol: str, root: int, keys: tuple, state: StateTensor,
                    layout: CellLayout, table: CutEntropyTable) -> TeleportPlan:
    steps = tuple(TeleportStep(m, s, d, table[m]) for m, s, d in keys)
    return TeleportPlan(protocol, root, steps, float(sum(s.cost for s in steps)), layout, state, table)


def p1(state: StateTensor, config: SearchConfig = SearchConfig(), *,
       root: int | None = None) -> TeleportPlan:
    """Cheapest rooted delivery tree over the parties.

    The start party is optimized unless ``root`` pins it.

    Each non-root party receives one teleportation carrying its whole
    subtree; the edge costs the entropy of that party set.

    ``g[U]``: cost to distribute bundle ``U`` once it sits at one of its members.
    ``split[W]``: cost to deliver ``W`` as a forest of bundles from a parent.
    """
    table = _party_table(state, config)
    n, tol = state.num_parties, config.tol
    size = 1 << n
    ent = table.values
    # per mask: (cost, steps); steps are (moved parties, source, dest) tuples
    split_cost = [0.0] * size
    split_steps: list[tuple] = [()] * size
    g_cost = [0.0] * size
    g_steps: list[tuple] = [()] * size
    g_root = [0] * size

    for mask in range(1, size):
        best = None
        for v in _bits(mask):
            rest = mask ^ (1 << v)
            key = _fill_parent(split_steps[rest], v)
            if best is None or _better(split_cost[rest], key, best[0], best[1], tol):
                best = (split_cost[rest], key, v)
        g_cost[mask], g_steps[mask], g_root[mask] = best

        low = mask & -mask
        others = mask ^ low
        best = None
        sub = others
        while True:
            bundle = sub | low
            remaining = mask ^ bundle
            cost = ent[bundle] + g_cost[bundle] + split_cost[remaining]
            key = ((_bits(bundle), _PARENT, g_root[bundle]),) + g_steps[bundle] + split_steps[remaining]
            if best is None or _better(cost, key, best[0], best[1], tol):
                best = (cost, key)
            if sub == 0:
                break
            sub = (sub - 1) & others
        split_cost[mask], split_steps[mask] = best

    full = size - 1
    if root is not None and not 0 <= root < n:
        raise StateError(f"root {root} out of range")
    best = None
    for r in range(n) if root is None else [root]:
        rest = full ^ (1 << r)
        key = (r, _fill_parent(split_steps[rest], r))
        if best is None or _better(split_cost[rest], key, best[0], best[1], tol):
            best = (split_cost[rest], key)
    _, (r, keys) = best
    return _plan_from_keys("P1", r, keys, state, party_layout(state), table)


def _prufer_edges(seq: Sequence[int], n: int) -> list[tuple[int, int]]:
    degree = [1] * n
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = min(i for i in range(n) if degree[i] == 1)
        edges.append((leaf, x))
        degree[leaf] -= 1
        degree[x] -= 1
    u, w = [i for i in range(n) if degree[i] == 1]
    edges.append((u, w))
    return edges


def _rooted_tree_plan(adj: list[list[int]], root: int) -> tuple[list[int], list[tuple[int, int]]]:
    """Subtree masks per vertex and preorder (parent, child) edges."""
    n = len(adj)
    parent = [-1] * n
    order = [root]
    seen = {root}
    for v in order:
        for w in sorted(adj[v]):
            if w not in seen:
                seen.add(w)
                parent[w] = v
                order.append(w)
    sub = [1 << v for v in range(n)]
    for v in reversed(order):
        if parent[v] >= 0:
            sub[parent[v]] |= sub[v]
    pre: list[tuple[int, int]] = []

    def walk(v):
        for w in sorted(adj[v]):
            if parent[w] == v:
                pre.append((v, w))
                walk(w)

    walk(root)
    return sub, pre


def p1_oracle(state: StateTensor, config: SearchConfig = SearchConfig()) -> TeleportPlan:
    """Enumerate every rooted labeled tree (Pruefer sequence x root) and keep the cheapest."""
    n = state.num_parties
    if n > config.oracle_max_parties:
        raise DimensionLimitError(f"oracle limited to {config.oracle_max_parties} parties, got {n}")
    table = _party_table(state, config)
    trees = [[(0, 1)]] if n == 2 else [_prufer_edges(seq, n) for seq in itertools.product(range(n), repeat=n - 2)]
    best = None
    for edges in trees:
        adj: list[list[int]] = [[] for _ in range(n)]
        for a, b in edges:
            adj[a].append(b)
            adj[b].append(a)
        for r in range(n):
            sub, pre = _rooted_tree_plan(adj, r)
            cost = sum(table.values[sub[v]] for v in range(n) if v != r)
            if best is None or cost < best[0] - config.tol:
                best = (cost, r, sub, pre)
    _, root, sub, pre = best
    keys = tuple((_bits(sub[w]), v, w) for v, w in pre)
    return _plan_from_keys("P1-oracle", root, keys, state, party_layout(state), table)


def naive_cost(state: StateTensor, root: int, config: SearchConfig = SearchConfig()) -> TeleportPlan:
    """Star plan: every other party's subsystem teleported straight from ``root``."""
    if not 0 <= root < state.num_parties:
        raise StateError(f"root {root} out of range")
    table = _party_table(state, config)
    keys = tuple(((v,), root, v) for v in range(state.num_parties) if v != root)
    return _plan_from_keys("naive", root, keys, state, party_layout(state), table)


# ---------------------------------------------------------------------------
# Route search over cell placements
# ---------------------------------------------------------------------------


def _submasks(mask: int):
    sub = mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


def route_search(
    state: StateTensor,
    layout: CellLayout,
    config: SearchConfig = SearchConfig(),
    *,
    root: int | None = None,
    start: Sequence[int] | None = None,
    external_start: bool = False,
    protocol: str = "route",
) -> TeleportPlan:
    """Uniform-cost search for the cheapest sequence of cell teleportations.

    A node records which cells sit at which location. Moving a nonempty set
    of co-located cells costs their entropy. By default the search starts
    with every cell at one party (minimized over parties, or ``root`` if
    given); ``start`` gives an explicit placement per cell, and
    ``external_start`` puts everything at an extra non-party location.
    Ties: total, then fewest steps, then start party, then lexicographic
    step order.
    """
    n_cells = len(layout.cells)
    if n_cells > config.max_cells:
        raise DimensionLimitError(f"{n_cells} cells exceeds the limit of {config.max_cells}")
    refined = layout_state(state, layout)
    table = layout_table(state, layout, config)
    n = state.num_parties
    n_loc = n + 1 if external_start else n
    owned = [layout.owned_mask(p) for p in range(n)] + ([0] if external_start else [])
    goal = tuple(owned)
    full = (1 << n_cells) - 1

    quantum = config.tol * 1e-3
    qcost = [int(round(float(s) / quantum)) for s in table.values]
    bits = [_bits(m) for m in range(1 << n_cells)]

    if start is not None:
        if len(start) != n_cells or any(not 0 <= p < n for p in start):
            raise StateError("start placement must give a party for every cell")
        masks = [0] * n_loc
        for i, p in enumerate(start):
            masks[p] |= 1 << i
        starts = [(tuple(masks), None)]
    elif external_start:
        starts = [(tuple([0] * n + [full]), EXTERNAL)]
    else:
        roots = [root] if root is not None else list(range(n))
        starts = []
        for r in roots:
            if not 0 <= r < n:
                raise StateError(f"root {r} out of range")
            masks = [0] * n_loc
            masks[r] = full
            starts.append((tuple(masks), r))

    def loc_id(i: int) -> int:
        return EXTERNAL if i == n else i

    heap: list = []
    best: dict[tuple, tuple] = {}
    for cfg, r in starts:
        key = (0, 0, -2 if r is None else r, ())
        if cfg not in best or key < best[cfg]:
            best[cfg] = key
            heapq.heappush(heap, (key, cfg))

    expanded = 0
    while heap:
        key, cfg = heapq.heappop(heap)
        if best.get(cfg) != key:
            continue
        if cfg == goal:
            cost_q, _, r, path = key
            steps = tuple(TeleportStep(bits[m], s, d, float(table.values[m])) for m, s, d in
                          ((table.mask_of(mv), s, d) for mv, s, d in path))
            total = float(sum(s.cost for s in steps))
            return TeleportPlan(protocol, None if r == -2 else r, steps, total, layout, refined, table)
        expanded += 1
        if expanded > config.max_expanded:
            raise SearchBudgetExceeded(f"expanded more than {config.max_expanded} configurations")
        cost_q, nsteps, r, path = key
        for p in range(n_loc):
            movable = cfg[p]
            if config.prune and p < n:
                movable &= ~owned[p]
            if not movable:
                continue
            for sub in _submasks(movable):
                c2 = cost_q + qcost[sub]
                for q in range(n):
                    if q == p:
                        continue
                    nxt = list(cfg)
                    nxt[p] ^= sub
                    nxt[q] |= sub
                    nxt = tuple(nxt)
                    nkey = (c2, nsteps + 1, r, path + ((bits[sub], loc_id(p), q),))
                    old = best.get(nxt)
                    if old is None or nkey < old:
                        best[nxt] = nkey
                        heapq.heappush(heap, (nkey, nxt))
        if len(heap) > config.max_frontier:
            raise SearchBudgetExceeded(f"search frontier exceeds {config.max_frontier} entries")
    raise StateError("goal placement unreachable")  # cannot happen: direct moves always exist


def p2(state: StateTensor, config: SearchConfig = SearchConfig()) -> TeleportPlan:
    """Route search over prime-dimensional cells."""
    return route_search(state, prime_split(state), config, protocol="P2")


def apply_embeddings(
    state: StateTensor,
    embeddings: Sequence[IsometrySpec | None] | Mapping[int, IsometrySpec],
) -> StateTensor:
    """Apply one local isometry per party (``None`` or missing means identity)."""
    specs = dict(embeddings) if isinstance(embeddings, Mapping) else {
        p: e for p, e in enumerate(embeddings)}
    extended = state
    for p in sorted(specs):
        spec = specs[p]
        if spec is None:
            continue
        if spec.party != p:
            raise StateError(f"embedding listed for party {p} targets party {spec.party}")
        extended = sk.apply_isometry(extended, spec)
    return extended


def p3(
    state: StateTensor,
    embeddings: Sequence[IsometrySpec | None] | Mapping[int, IsometrySpec],
    config: SearchConfig = SearchConfig(),
) -> TeleportPlan:
    """P2 on the state after the given ancilla embeddings (one ancilla choice)."""
    extended = apply_embeddings(state, embeddings)
    layout = prime_split(extended, derivation="isometry-extended")
    return route_search(extended, layout, config, protocol="P3")


# ---------------------------------------------------------------------------
# Independent plan validation
# ---------------------------------------------------------------------------


@dataclass
class PlanReport:
    violations: list[str]
    recomputed_total: float
    step_costs: list[float]

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_plan(state: StateTensor, layout: CellLayout, plan: TeleportPlan,
                tol: float = 1e-9) -> PlanReport:
    """Replay ``plan`` and recompute every cost directly from the state."""
    violations: list[str] = []
    n_cells = len(layout.cells)
    n = state.num_parties
    names = layout.names
    try:
        refined = layout_state(state, layout)
    except StateError as exc:
        return PlanReport([f"layout mismatch: {exc}"], float("nan"), [])

    if plan.root is None:
        violations.append("plan has no starting party")
        where = [c.owner for c in layout.cells]
    else:
        if plan.root != EXTERNAL and not 0 <= plan.root < n:
            return PlanReport([f"root {plan.root} out of range"], float("nan"), [])
        where = [plan.root] * n_cells

    costs: list[float] = []
    for k, step in enumerate(plan.steps, 1):
        if not step.moved:
            violations.append(f"step {k}: moves nothing")
            costs.append(0.0)
            continue
        if any(not 0 <= i < n_cells for i in step.moved):
            violations.append(f"step {k}: unknown cell")
            costs.append(float("nan"))
            continue
        if step.source == step.dest:
            violations.append(f"step {k}: source equals destination")
        if not 0 <= step.dest < n:
            violations.append(f"step {k}: destination out of range")
        for i in step.moved:
            if where[i] != step.source:
                violations.append(f"step {k}: cell not at source ({names[i]})")
        factors = [f for i in step.moved for f in layout.cells[i].factors]
        cost = sk.subset_entropy(refined, factors, max_dim=sk.MAX_TOTAL_DIM)
        costs.append(cost)
        if abs(cost - step.cost) > tol:
            violations.append(f"step {k}: cost mismatch (claimed {step.cost:.9f}, recomputed {cost:.9f})")
        for i in step.moved:
            where[i] = step.dest

    for i, c in enumerate(layout.cells):
        if where[i] != c.owner:
            violations.append(f"cell {names[i]} not delivered to its owner")
    total = float(sum(costs))
    if not abs(total - plan.total) <= tol * max(1, len(plan.steps)):
        violations.append(f"total mismatch (claimed {plan.total:.9f}, recomputed {total:.9f})")
    if plan.protocol.startswith("P1"):
        if len(plan.steps) != n - 1:
            violations.append(f"P1 plan has {len(plan.steps)} steps, expected {n - 1}")
        for k, step in enumerate(plan.steps, 1):
            if all(layout.cells[i].owner != step.dest for i in step.moved if 0 <= i < n_cells):
                violations.append(f"step {k}: destination owns none of the moved cells")
    return PlanReport(violations, total, costs)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def plan_to_doc(plan: TeleportPlan, *, include_table: bool = True) -> dict:
    """Structured document for a plan; the embedded state allows re-verification."""
    from .stateparse import render

    names = plan.layout.names
    doc = {
        "protocol": plan.protocol,
        "root": plan.party_name(plan.root),
        "steps": [
            {
                "moved": [names[i] for i in s.moved],
                "from": plan.party_name(s.source),
                "to": plan.party_name(s.dest),
                "cost_ebits": s.cost,
            }
            for s in plan.steps
        ],
        "total_ebits": plan.total,
        "layout": {
            "derivation": plan.layout.derivation,
            "factor_dims": list(plan.layout.factor_dims),
            "cells": [
                {"name": c.name, "party": plan.state.party_names[c.owner], "dim": c.dim,
                 "factors": list(c.factors)}
                for c in plan.layout.cells
            ],
        },
        "state": render(plan.state),
    }
    if include_table and plan.table is not None:
        doc["entropy_table"] = {",".join(k): v for k, v in plan.table.items()}
    return doc


def plan_from_doc(doc: Mapping) -> tuple[StateTensor, CellLayout, TeleportPlan]:
    """Inverse of :func:`plan_to_doc` (without the entropy table)."""
    from .stateparse import loads

    state = loads(doc["state"])
    lay = doc["layout"]
    party = {nm: i for i, nm in enumerate(state.party_names)}
    try:
        cells = tuple(
            Cell(tuple(c["factors"]), int(c["dim"]), party[c["party"]], c["name"]) for c in lay["cells"]
        )
        layout = CellLayout(cells, tuple(lay["factor_dims"]), lay["derivation"])
        index = {c.name: i for i, c in enumerate(cells)}

        def loc(name):
            if name is None:
                return None
            return EXTERNAL if name == "external" else party[name]

        steps = tuple(
            TeleportStep(tuple(index[m] for m in s["moved"]), loc(s["from"]), loc(s["to"]),
                         float(s["cost_ebits"]))
            for s in doc["steps"]
        )
    except KeyError as exc:
        raise StateError(f"plan document references unknown name {exc}") from None
    plan = TeleportPlan(doc["protocol"], loc(doc["root"]), steps, float(doc["total_ebits"]),
                        layout, state)
    return state, layout, plan


def table_to_rows(table: CutEntropyTable) -> list[tuple[tuple[str, ...], float]]:
    """Nontrivial cuts sorted by subset size, then lexicographically by names."""
    rows = list(table.items())
    rows.sort(key=lambda kv: (len(kv[0]), kv[0]))
    return rows


__all__ = [
    "Cell", "CellLayout", "SearchConfig", "TeleportStep", "TeleportPlan", "PlanReport",
    "party_layout", "native_layout", "prime_split", "layout_state", "prime_factors",
    "p1", "p1_oracle", "naive_cost", "route_search", "p2", "p3", "apply_embeddings",
    "verify_plan", "plan_to_doc", "plan_from_doc", "table_to_rows", "EXTERNAL",
]

