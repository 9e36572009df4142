"""Brute-force ground truth for tests and acceptance runs.

Nothing here is clever on purpose: the separation oracle tries every subset
of candidate lines in deterministic order, and the forest-CSP oracle tries
every combination of tree anchor values.  Both exist to be obviously correct
at desk scale.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

from .forest_csp import Assignment, ForestCspInstance, propagate, verify_assignment
from .geometry import Instance, Separation, verify_separation


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CandidateLines:
    """Per-axis candidate positions: midpoints between consecutive distinct
    coordinates plus one sentinel outside each extreme.  Any separation can be
    shifted onto candidates only, because between-ness depends only on which
    coordinate gap a line occupies."""

    xs: tuple[Fraction, ...]
    ys: tuple[Fraction, ...]


def candidate_lines(instance: Instance) -> CandidateLines:
    def axis(coords):
        vals = sorted(set(coords))
        if not vals:
            return ()
        mids = [Fraction(a + b, 2) for a, b in zip(vals, vals[1:])]
        return tuple([vals[0] - 1] + mids + [vals[-1] + 1])

    pts = instance.points()
    return CandidateLines(axis([p.x for p in pts]), axis([p.y for p in pts]))


def min_separation_bruteforce(
    instance: Instance, upper_bound: int | None = None
) -> Separation | None:
    """Exact minimum separation by iterative deepening over candidate subsets.

    Returns the first (lexicographically smallest in candidate order, x-lines
    before y-lines) separation of minimum size, or None when ``upper_bound``
    is given and no separation within it exists.  Practical up to roughly a
    dozen points.
    """
    cands = candidate_lines(instance)
    pool = [("x", v) for v in cands.xs] + [("y", v) for v in cands.ys]
    limit = len(pool) if upper_bound is None else min(upper_bound, len(pool))
    for size in range(0, limit + 1):
        for combo in itertools.combinations(pool, size):
            xs = tuple(v for axis, v in combo if axis == "x")
            ys = tuple(v for axis, v in combo if axis == "y")
            sep = Separation(xs, ys)
            if verify_separation(instance, sep) is None:
                return sep
    return None


def forest_csp_enumerate(inst: ForestCspInstance, cap: int = 10**6) -> list[Assignment]:
    """All satisfying assignments, by brute force over per-tree anchor values."""
    comps = inst.trees()
    total = 1
    for comp in comps:
        total *= max(inst.dom[comp[0]], 1) if comp else 1
        if total > cap:
            raise TooLarge(f"assignment space exceeds cap {cap}")
    anchors = [comp[0] for comp in comps]
    spreads = []
    for comp in comps:
        anchor = comp[0]
        per_value = []
        for a in range(1, inst.dom[anchor] + 1):
            per_value.append({y: propagate(inst, anchor, a, y) for y in comp})
        spreads.append(per_value)
    out = []
    for choice in itertools.product(*[range(len(s)) for s in spreads]):
        asg: Assignment = {}
        for spread, idx in zip(spreads, choice):
            asg.update(spread[idx])
        if verify_assignment(inst, asg) is None:
            out.append(asg)
    return out
