"""Forest CSP instances and their branching solver.

Variables live on a forest; every tree shares one domain ``{1..m}``.  Each
edge carries a segment reversion ``g`` and enforces ``g(value(u)) = value(v)``,
so fixing any variable of a tree fixes the whole tree (m assignments per
tree).  On top of that, downwards-closed binary constraints may bind any two
variables.  The *apparent size* of an instance is
``#variables + #trees + #constraints``; the solver's branching strictly
shrinks it at every recursion step.

Instances are immutable; every operation returns a fresh instance.  Variables
carry optional names and optional value tables (domain index -> external
value) so callers can map solutions back to their own coordinate spaces.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from .segrev import (
    DownwardClosedRelation,
    RepresentedRelation,
    SegmentRepresentation,
    SegmentReversion,
    dc_compose,
    dc_compose_second,
    seg_swap,
)


class DifferentTrees(ValueError):
    pass


Constraint = tuple[int, int, DownwardClosedRelation]
Edge = tuple[int, int, SegmentReversion]
Assignment = dict[int, int]


@dataclass(frozen=True)
class ForestCspInstance:
    dom: tuple[int, ...]                      # per-variable domain size
    edges: tuple[Edge, ...]
    constraints: tuple[Constraint, ...]
    names: tuple[object, ...] = ()
    tables: tuple[tuple[object, ...] | None, ...] = ()

    def __post_init__(self) -> None:
        n = self.n
        if not self.names:
            object.__setattr__(self, "names", tuple(range(n)))
        if not self.tables:
            object.__setattr__(self, "tables", (None,) * n)
        if len(self.names) != n or len(self.tables) != n:
            raise ValueError("names/tables length mismatch")
        seen = set()
        for u, v, g in self.edges:
            if u == v or not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"bad edge ({u},{v})")
            if g.m != self.dom[u] or g.m != self.dom[v]:
                raise ValueError("edge reversion domain mismatch")
            seen.add((min(u, v), max(u, v)))
        if len(seen) != len(self.edges):
            raise ValueError("duplicate edges")
        for comp in self.trees():
            if len({self.dom[v] for v in comp}) > 1:
                raise ValueError("domain sizes differ within a tree")
            if len(self.edges_of(set(comp))) != len(comp) - 1:
                raise ValueError("component has a cycle")
        for u, v, r in self.constraints:
            if r.m1 != self.dom[u] or r.m2 != self.dom[v]:
                raise ValueError("constraint relation domain mismatch")
        for v, t in enumerate(self.tables):
            if t is not None and len(t) != self.dom[v]:
                raise ValueError("value table length mismatch")

    @property
    def n(self) -> int:
        return len(self.dom)

    def adjacency(self) -> dict[int, list[tuple[int, SegmentReversion]]]:
        adj: dict[int, list[tuple[int, SegmentReversion]]] = {v: [] for v in range(self.n)}
        for u, v, g in self.edges:
            adj[u].append((v, g))
            adj[v].append((u, g))
        return adj

    def trees(self) -> list[list[int]]:
        """Connected components, each sorted, ordered by smallest variable."""
        adj = self.adjacency()
        seen: set[int] = set()
        comps = []
        for start in range(self.n):
            if start in seen:
                continue
            comp = [start]
            seen.add(start)
            stack = [start]
            while stack:
                x = stack.pop()
                for y, _ in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        comp.append(y)
                        stack.append(y)
            comps.append(sorted(comp))
        return comps

    def tree_of(self, y: int) -> list[int]:
        for comp in self.trees():
            if y in comp:
                return comp
        raise ValueError(f"no such variable {y}")

    def edges_of(self, vars_: set[int]) -> list[Edge]:
        return [e for e in self.edges if e[0] in vars_ or e[1] in vars_]

    def apparent_size(self) -> int:
        return self.n + len(self.trees()) + len(self.constraints)


def propagate(inst: ForestCspInstance, y: int, a: int, y2: int) -> int:
    """Image of value ``a`` at ``y`` along the unique tree path to ``y2``."""
    maps = _propagation_maps(inst, y)
    if y2 not in maps:
        raise DifferentTrees(f"{y} and {y2} are in different trees")
    x = a
    for g in maps[y2]:
        x = g.apply(x)
    return x


def _propagation_maps(inst: ForestCspInstance, y: int) -> dict[int, list[SegmentReversion]]:
    """Per reachable variable, the reversions applied in order from ``y``."""
    adj = inst.adjacency()
    out: dict[int, list[SegmentReversion]] = {y: []}
    stack = [y]
    while stack:
        x = stack.pop()
        for z, g in adj[x]:
            if z not in out:
                out[z] = out[x] + [g]
                stack.append(z)
    return out


def verify_assignment(inst: ForestCspInstance, asg: Assignment):
    """None when the assignment satisfies the instance, else the violation."""
    for v in range(inst.n):
        if v not in asg or not 1 <= asg[v] <= inst.dom[v]:
            return ("domain", v)
    for u, v, g in inst.edges:
        if g.apply(asg[u]) != asg[v]:
            return ("edge", u, v)
    for i, (u, v, r) in enumerate(inst.constraints):
        if inst.dom[u] == 0 or inst.dom[v] == 0:
            return ("constraint", i)
        if not r.contains(asg[u], asg[v]):
            return ("constraint", i)
    return None


# ---------------------------------------------------------------------------
# forbidding values

def _forbid_with_map(inst: ForestCspInstance, y: int, a: int):
    """Forbid value ``a`` at ``y``; returns (instance, removed-index-per-var).

    The tree's domain shrinks by one and every variable in the tree is
    renumbered around its own propagated copy of ``a``; constraints touching
    the tree are recomposed through the renumbering maps.
    """
    if not 1 <= a <= inst.dom[y]:
        raise ValueError(f"value {a} not in domain of {y}")
    maps = _propagation_maps(inst, y)
    removed = {}
    for v, chain in maps.items():
        x = a
        for g in chain:
            x = g.apply(x)
        removed[v] = x
    m = inst.dom[y]
    new_dom = tuple(d - 1 if v in removed else d for v, d in enumerate(inst.dom))

    def alpha(v: int, b: int) -> int:
        # new index -> old index at variable v
        return b if b < removed[v] else b + 1

    new_edges = []
    for u, v, g in inst.edges:
        if u in removed:
            images = []
            for b in range(1, m):
                img = g.apply(alpha(u, b))
                images.append(img if img < removed[v] else img - 1)
            g = SegmentReversion.from_mapping(m - 1, images)
        new_edges.append((u, v, g))

    new_constraints = []
    for u, v, r in inst.constraints:
        if u in removed:
            f = r.frontier
            front = []
            for b in range(1, m):
                val = f[alpha(u, b) - 1]
                if v in removed:
                    val = val - 1 if removed[v] <= val else val
                front.append(val)
            r = DownwardClosedRelation(m - 1, r.m2 - (1 if v in removed else 0), tuple(front))
        elif v in removed:
            front = tuple(x - 1 if removed[v] <= x else x for x in r.frontier)
            r = DownwardClosedRelation(r.m1, m - 1, front)
        new_constraints.append((u, v, r))

    new_tables = list(inst.tables)
    for v in removed:
        t = new_tables[v]
        if t is not None:
            new_tables[v] = t[: removed[v] - 1] + t[removed[v]:]

    out = ForestCspInstance(
        new_dom, tuple(new_edges), tuple(new_constraints), inst.names, tuple(new_tables)
    )
    return out, removed


def forbid_value(inst: ForestCspInstance, y: int, a: int) -> ForestCspInstance:
    """Delete value ``a`` from ``y``'s tree domain, propagating the renumbering."""
    return _forbid_with_map(inst, y, a)[0]


def restrict_domain(inst: ForestCspInstance, y: int, keep: Iterable[int]) -> ForestCspInstance:
    return _restrict_with_pull(inst, y, keep)[0]


def _restrict_with_pull(inst: ForestCspInstance, y: int, keep: Iterable[int]):
    keep_set = set(keep)
    pulls = []
    # forbid larger values first so pending indices at y stay valid
    for a in sorted((b for b in range(1, inst.dom[y] + 1) if b not in keep_set), reverse=True):
        inst, removed = _forbid_with_map(inst, y, a)
        pulls.append(removed)

    def pull(asg: Assignment) -> Assignment:
        out = dict(asg)
        for removed in reversed(pulls):
            for v, cut in removed.items():
                if out[v] >= cut:
                    out[v] += 1
        return out

    return inst, pull


# ---------------------------------------------------------------------------
# preprocessing

TRIVIALLY_SAT = "trivially_sat"
UNSAT = "unsat"
REDUCED = "reduced"


@dataclass(frozen=True)
class Preprocessed:
    status: str
    instance: ForestCspInstance | None


def preprocess(inst: ForestCspInstance) -> Preprocessed:
    out = _preprocess_ex(inst)
    return Preprocessed(out[0], out[1])


def _preprocess_ex(inst: ForestCspInstance):
    """Exhaustive preprocessing; returns (status, instance, pull)."""
    pulls: list[Callable[[Assignment], Assignment]] = []

    def pull_all(asg: Assignment) -> Assignment:
        for p in reversed(pulls):
            asg = p(asg)
        return asg

    changed = True
    while changed:
        changed = False
        if inst.n == 0:
            return TRIVIALLY_SAT, inst, pull_all
        if any(d == 0 for d in inst.dom):
            return UNSAT, None, pull_all

        # eliminate constraints binding two variables of one tree by
        # enumerating the tree's assignments and forbidding violators
        intra = next(
            (i for i, (u, v, _) in enumerate(inst.constraints)
             if inst.tree_of(u) == inst.tree_of(v)),
            None,
        )
        if intra is not None:
            u, v, r = inst.constraints[intra]
            anchor = inst.tree_of(u)[0]
            while True:
                u, v, r = inst.constraints[intra]
                bad = None
                for a in range(1, inst.dom[anchor] + 1):
                    if not r.contains(propagate(inst, anchor, a, u), propagate(inst, anchor, a, v)):
                        bad = a
                        break
                if bad is None:
                    break
                inst, removed = _forbid_with_map(inst, anchor, bad)
                pulls.append(_pull_of_removed(removed))
                if inst.dom[anchor] == 0:
                    return UNSAT, None, pull_all
            cons = list(inst.constraints)
            del cons[intra]
            inst = replace(inst, constraints=tuple(cons))
            changed = True
            continue

        # every (constraint, side, value) needs a compatible partner value
        for i, (u, v, r) in enumerate(inst.constraints):
            bad_u = next((a for a in range(1, inst.dom[u] + 1) if r.frontier[a - 1] == 0), None)
            if bad_u is not None:
                inst, removed = _forbid_with_map(inst, u, bad_u)
                pulls.append(_pull_of_removed(removed))
                changed = True
                break
            top = r.frontier[0] if inst.dom[u] else 0
            if top < inst.dom[v]:
                inst, removed = _forbid_with_map(inst, v, inst.dom[v])
                pulls.append(_pull_of_removed(removed))
                changed = True
                break
    return REDUCED, inst, pull_all


def _pull_of_removed(removed: dict[int, int]):
    def pull(asg: Assignment) -> Assignment:
        out = dict(asg)
        for v, cut in removed.items():
            if out[v] >= cut:
                out[v] += 1
        return out
    return pull


# ---------------------------------------------------------------------------
# the branching solver

def solve(inst: ForestCspInstance) -> Assignment | None:
    """Complete deterministic search; first satisfying assignment or None."""
    asg = _solve(inst, inst.apparent_size() + 1)
    if asg is not None:
        assert verify_assignment(inst, asg) is None, "solver produced a bad assignment"
    return asg


def _solve(inst: ForestCspInstance, parent_size: int) -> Assignment | None:
    assert inst.apparent_size() < parent_size, "recursion must shrink apparent size"
    status, cur, pull = _preprocess_ex(inst)
    if status == UNSAT:
        return None
    if status == TRIVIALLY_SAT:
        return pull({})
    size = cur.apparent_size()

    # branching step 1: some tree's anchor takes the least value
    for comp in cur.trees():
        sub, extend = _branch_anchor_one(cur, comp)
        r = _solve(sub, size)
        if r is not None:
            return pull(extend(r))

    # branching step 2: some variable sits on a segment endpoint of an
    # incident edge reversion; restrict to endpoints and contract the edge
    for ei, (u, v, g) in enumerate(cur.edges):
        for y, other in ((u, v), (v, u)):
            for side in ("left", "right"):
                sub, extend = _branch_endpoint(cur, ei, y, other, side)
                r = _solve(sub, size)
                if r is not None:
                    return pull(extend(r))

    # branching step 3: guess the constraint that blocks decrementing the
    # first tree; its frontier function ties the two trees together
    comp = cur.trees()[0]
    comp_set = set(comp)
    for ci, (u, v, _) in enumerate(cur.constraints):
        in_u, in_v = u in comp_set, v in comp_set
        if in_u == in_v:
            continue
        sub, extend = _branch_merge(cur, comp, ci, y1=u if in_u else v)
        r = _solve(sub, size)
        if r is not None:
            return pull(extend(r))
    return None


def _branch_anchor_one(inst: ForestCspInstance, comp: list[int]):
    """Assume the tree's anchor is 1: restrict neighbors, delete the tree."""
    anchor = comp[0]
    comp_set = set(comp)
    values = {y: propagate(inst, anchor, 1, y) for y in comp}

    cur = inst
    pulls = []
    i = 0
    while i < len(cur.constraints):
        u, v, r = cur.constraints[i]
        if (u in comp_set) != (v in comp_set):
            if u in comp_set:
                side_val = propagate(cur, anchor, 1, u)
                allowed = {b for b in range(1, cur.dom[v] + 1) if r.contains(side_val, b)}
                cur, p = _restrict_with_pull(cur, v, allowed)
            else:
                side_val = propagate(cur, anchor, 1, v)
                allowed = {a for a in range(1, cur.dom[u] + 1) if r.contains(a, side_val)}
                cur, p = _restrict_with_pull(cur, u, allowed)
            pulls.append(p)
        i += 1

    keep = [y for y in range(cur.n) if y not in comp_set]
    remap = {y: i for i, y in enumerate(keep)}
    sub = ForestCspInstance(
        tuple(cur.dom[y] for y in keep),
        tuple((remap[a], remap[b], g) for a, b, g in cur.edges
              if a not in comp_set and b not in comp_set),
        tuple((remap[a], remap[b], r) for a, b, r in cur.constraints
              if a not in comp_set and b not in comp_set),
        tuple(cur.names[y] for y in keep),
        tuple(cur.tables[y] for y in keep),
    )

    def extend(asg: Assignment) -> Assignment:
        out = {y: asg[remap[y]] for y in keep}
        for y in comp:
            out[y] = values[y]
        for p in reversed(pulls):
            out = p(out)
        return out

    return sub, extend


def _branch_endpoint(inst: ForestCspInstance, ei: int, y: int, other: int, side: str):
    """Restrict ``y`` to the segment endpoints of the edge reversion, then
    contract the (now identity) edge by merging ``other`` into ``y``."""
    g = inst.edges[ei][2]
    if side == "left":
        keep = {lo for lo, _ in g.segments()}
    else:
        keep = {hi for _, hi in g.segments()}
    cur, pull_restrict = _restrict_with_pull(inst, y, keep)

    u, v, g2 = cur.edges[ei]
    assert {u, v} == {y, other}
    assert g2.is_identity(), "restriction to endpoints must flatten the reversion"

    keep_vars = [w for w in range(cur.n) if w != other]
    remap = {w: i for i, w in enumerate(keep_vars)}

    def target(w: int) -> int:
        return remap[y] if w == other else remap[w]

    edges = []
    for j, (a, b, h) in enumerate(cur.edges):
        if j == ei:
            continue
        edges.append((target(a), target(b), h))
    cons = tuple((target(a), target(b), r) for a, b, r in cur.constraints)
    sub = ForestCspInstance(
        tuple(cur.dom[w] for w in keep_vars),
        tuple(edges),
        cons,
        tuple(cur.names[w] for w in keep_vars),
        tuple(cur.tables[w] for w in keep_vars),
    )

    def extend(asg: Assignment) -> Assignment:
        out = {w: asg[remap[w]] for w in keep_vars}
        out[other] = out[y]
        return pull_restrict(out)

    return sub, extend


def _frontier_toward(inst: ForestCspInstance, ci: int, y1: int) -> tuple[int, ...]:
    """Max admissible value of ``y1`` per value of the other variable."""
    u, v, r = inst.constraints[ci]
    if y1 == u:
        rr = r.transpose()
    else:
        rr = r
    return rr.frontier


def _branch_merge(inst: ForestCspInstance, comp: list[int], ci: int, y1: int):
    """Merge ``y1``'s tree into the other endpoint's tree through the guessed
    tight constraint: the frontier function pins tree ``T`` to tree ``S``."""
    u, v, _ = inst.constraints[ci]
    y2 = v if y1 == u else u
    comp_set = set(comp)
    m_t = inst.dom[y1]
    m_s = inst.dom[y2]

    f_prime = _frontier_toward(inst, ci, y1)
    assert len(f_prime) == m_s
    assert all(1 <= x <= m_t for x in f_prime), "preprocessing must make the frontier total"
    g_circ = SegmentReversion.full(m_s)
    f_dd = tuple(f_prime[g_circ.apply(s) - 1] for s in range(1, m_s + 1))

    # root T at y1 and push the pin function down with seg_swap
    adj = {w: [] for w in comp}
    rev_of = {}
    for a, b, g in inst.edges:
        if a in comp_set:
            adj[a].append(b)
            adj[b].append(a)
            rev_of[(a, b)] = rev_of[(b, a)] = g
    f_at = {y1: f_dd}
    new_rev: dict[tuple[int, int], SegmentReversion] = {}
    order = [y1]
    seen = {y1}
    qi = 0
    while qi < len(order):
        parent = order[qi]
        qi += 1
        for child in adj[parent]:
            if child in seen:
                continue
            seen.add(child)
            order.append(child)
            f_child, g_new = seg_swap(f_at[parent], rev_of[(child, parent)])
            f_at[child] = f_child
            new_rev[(child, parent)] = g_new

    edges = []
    for a, b, g in inst.edges:
        if a in comp_set:
            key = (a, b) if (a, b) in new_rev else (b, a)
            edges.append((a, b, new_rev[key]))
        else:
            edges.append((a, b, g))
    edges.append((y1, y2, g_circ))

    cons = []
    for a, b, r in inst.constraints:
        if a in comp_set:
            r = dc_compose(f_at[a], r)
        if b in comp_set:
            r = dc_compose_second(f_at[b], r)
        cons.append((a, b, r))

    dom = tuple(m_s if w in comp_set else d for w, d in enumerate(inst.dom))
    tables = list(inst.tables)
    for w in comp:
        t = tables[w]
        if t is not None:
            tables[w] = tuple(t[f_at[w][s - 1] - 1] for s in range(1, m_s + 1))
    sub = ForestCspInstance(dom, tuple(edges), tuple(cons), inst.names, tuple(tables))
    assert sub.apparent_size() < inst.apparent_size()

    def extend(asg: Assignment) -> Assignment:
        out = dict(asg)
        for w in comp:
            out[w] = f_at[w][asg[w] - 1]
        return out

    return sub, extend


# ---------------------------------------------------------------------------
# translation from chain-represented binary CSPs

@dataclass(frozen=True)
class AuxiliaryCspInstance:
    """Binary CSP whose constraints carry per-side segment representations."""

    dom: tuple[int, ...]
    constraints: tuple[tuple[int, int, RepresentedRelation], ...]

    def satisfied_by(self, values: Sequence[int]) -> bool:
        return all(r.contains(values[i], values[j]) for i, j, r in self.constraints)


def from_auxiliary(aux: AuxiliaryCspInstance) -> tuple[ForestCspInstance, tuple[int, ...]]:
    """Expand chain representations into clone paths hung off each variable.

    Every constraint's side-``j`` representation of depth ``k_j`` becomes a
    path of ``k_j`` fresh variables whose edges apply the reversions in
    application order; the downwards-closed core then binds the two path
    endpoints.  The apparent size of the result is ``p + 2k + c`` for ``k``
    variables, ``c`` constraints, and total representation depth ``p``.
    """
    k = len(aux.dom)
    dom = list(aux.dom)
    names: list[object] = [("var", i) for i in range(k)]
    tables: list[None] = [None] * k
    edges: list[Edge] = []
    cons: list[Constraint] = []
    for idx, (i, j, rel) in enumerate(aux.constraints):
        ends = []
        for side, var in ((1, i), (2, j)):
            rep = rel.rep1 if side == 1 else rel.rep2
            cur = var
            for d, g in enumerate(rep.application_order()):
                dom.append(aux.dom[var])
                names.append(("clone", idx, side, d))
                tables.append(None)
                new = len(dom) - 1
                edges.append((cur, new, g))
                cur = new
            ends.append(cur)
        cons.append((ends[0], ends[1], rel.rel))
    inst = ForestCspInstance(tuple(dom), tuple(edges), tuple(cons),
                             tuple(names), tuple(tables))
    return inst, tuple(range(k))


# ---------------------------------------------------------------------------
# debug dump (golden-test serialization)

def dump_instance(inst: ForestCspInstance) -> str:
    lines = [f"forest-csp n={inst.n} trees={len(inst.trees())} constraints={len(inst.constraints)}"]
    for comp in inst.trees():
        m = inst.dom[comp[0]] if comp else 0
        lines.append(f"tree {' '.join(str(v) for v in comp)} dom=1..{m}")
    for u, v, g in inst.edges:
        lines.append(f"edge {u}-{v} boundaries={list(g.boundaries)}")
    for u, v, r in inst.constraints:
        lines.append(f"constraint {u},{v} frontier={list(r.frontier)}")
    return "\n".join(lines) + "\n"
