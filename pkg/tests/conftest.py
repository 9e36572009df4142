import random

import pytest

from optdisc.forest_csp import ForestCspInstance
from optdisc.segrev import DownwardClosedRelation, SegmentReversion


def random_reversion(rng: random.Random, m: int) -> SegmentReversion:
    cuts = sorted(rng.sample(range(2, m + 1), rng.randint(0, m - 1))) if m > 1 else []
    return SegmentReversion(m, tuple([1] + cuts + [m + 1]))


def random_dc_relation(rng: random.Random, m1: int, m2: int) -> DownwardClosedRelation:
    frontier = sorted((rng.randint(0, m2) for _ in range(m1)), reverse=True)
    return DownwardClosedRelation(m1, m2, tuple(frontier))


def random_forest_instance(
    rng: random.Random,
    max_trees: int = 4,
    max_nodes: int = 6,
    max_dom: int = 8,
    max_constraints: int = 5,
    allow_empty_rows: bool = True,
) -> ForestCspInstance:
    n_trees = rng.randint(1, max_trees)
    n_nodes = rng.randint(n_trees, max_nodes)
    # assign nodes to trees; node 0..n_nodes-1, trees get at least one node
    owner = list(range(n_trees)) + [rng.randrange(n_trees) for _ in range(n_nodes - n_trees)]
    rng.shuffle(owner)
    doms = [rng.randint(1, max_dom) for _ in range(n_trees)]
    dom = tuple(doms[owner[v]] for v in range(n_nodes))
    edges = []
    first_of_tree: dict[int, list[int]] = {}
    for v in range(n_nodes):
        members = first_of_tree.setdefault(owner[v], [])
        if members:
            u = rng.choice(members)
            edges.append((u, v, random_reversion(rng, dom[v])))
        members.append(v)
    cons = []
    for _ in range(rng.randint(0, max_constraints)):
        u = rng.randrange(n_nodes)
        v = rng.randrange(n_nodes)
        if u == v:
            continue
        rel = random_dc_relation(rng, dom[u], dom[v])
        if not allow_empty_rows and (not rel.frontier or rel.frontier[-1] == 0):
            continue
        cons.append((u, v, rel))
    return ForestCspInstance(dom, tuple(edges), tuple(cons))
