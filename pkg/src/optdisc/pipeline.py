"""End-to-end solving: bootstrap by iterative compression, branch + emit +
solve per branch, and the minimization loop.

``compress`` answers one decision query given a valid bootstrap separation;
``iterative_compression`` maintains a small separation while inserting points
one at a time, augmenting and re-compressing on violation; ``solve_min``
iterates the decision bound upward from zero.  Every separation returned
anywhere is re-verified before it leaves this module.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from . import reduction
from .forest_csp import solve as solve_forest
from .geometry import (
    CoordMaps,
    Instance,
    Separation,
    denormalize_separation,
    normalize,
    verify_separation,
)
from .reduction import Rejected


class InvalidApprox(ValueError):
    """The provided bootstrap line sets do not separate the instance."""


@dataclass(frozen=True)
class SolveOptions:
    mode: str = "exhaustive"        # color-coding mode: exhaustive | randomized
    trials: int = 64                # randomized mode: maps tried per branch
    seed: int = 0
    jobs: int = 1
    trace: Callable[[dict], None] | None = None


def augment_separation(sep: Separation, point) -> Separation:
    """Isolate a grid point in its own cell by fencing all four sides."""
    if point.x % 3 or point.y % 3:
        raise ValueError("augmentation expects a normalized grid point")
    xs = sorted(set(sep.xs) | {point.x - 1, point.x + 1})
    ys = sorted(set(sep.ys) | {point.y - 1, point.y + 1})
    return Separation(tuple(xs), tuple(ys))


def _min_hits(intervals: list[tuple[int, int]]) -> int:
    """Minimum number of points hitting every open interval (greedy on the
    earliest right endpoint)."""
    count = 0
    last = None
    for lo, hi in sorted(intervals, key=lambda t: t[1]):
        if last is None or last <= lo:
            count += 1
            last = hi
    return count


def forced_line_bound(instance: Instance) -> tuple[int, int]:
    """Per-axis lower bounds on any separation's line counts.

    A cross pair sharing an x-coordinate can only be split horizontally (and
    symmetrically), so the forced y-intervals must be hit by the horizontal
    lines alone.
    """
    x_iv, y_iv = [], []
    for p in instance.w1:
        for q in instance.w2:
            if p.x == q.x:
                y_iv.append((min(p.y, q.y), max(p.y, q.y)))
            if p.y == q.y:
                x_iv.append((min(p.x, q.x), max(p.x, q.x)))
    return _min_hits(x_iv), _min_hits(y_iv)


def _canonical_apx(values: Iterable[int], hi_coord: int) -> tuple[int, ...]:
    """Shift line values onto the 1 mod 3 representative of their gap and add
    outer lines bounding every point coordinate on the axis."""
    out = {1, hi_coord + 1}
    for v in values:
        out.add(v - (v - 1) % 3)
    return tuple(sorted(v for v in out if v <= hi_coord + 1))


def _trace(opts: SolveOptions, **record):
    if opts.trace is not None:
        opts.trace(record)


def compress(
    instance: Instance,
    x0: Sequence[int],
    y0: Sequence[int],
    k: int,
    opts: SolveOptions = SolveOptions(),
) -> Separation | None:
    """Search for a separation of size <= k of a normalized instance, guided
    by the bootstrap separation (x0, y0).

    Branches over bootstrap augmentations, layouts, cell types, colorings,
    and situation guesses; emits and solves one forest CSP per leaf.  The
    first satisfiable leaf wins; its assignment is mapped back to coordinates
    and verified.  None means no branch succeeded (exhaustive colorings make
    that a definite no; randomized ones are one-sided).
    """
    pts = instance.points()
    x0 = _canonical_apx(x0, max(p.x for p in pts))
    y0 = _canonical_apx(y0, max(p.y for p in pts))
    if verify_separation(instance, Separation(x0, y0)) is not None:
        raise InvalidApprox("bootstrap lines do not separate the instance")

    min_kx, min_ky = forced_line_bound(instance)
    if min_kx + min_ky > k:
        return None
    for xa, ya in reduction.branch_a(instance, x0, y0, max(k - 1, 0)):
        for ls in reduction.layouts(xa, ya, k):
            kx = sum(1 for ln in ls.xs if ln.kind == "opt")
            ky = sum(1 for ln in ls.ys if ln.kind == "opt")
            if kx < min_kx or ky < min_ky:
                continue
            sep = _solve_layout(instance, ls, opts)
            if sep is not None:
                assert verify_separation(instance, sep) is None
                return sep
    return None


def _solve_layout(
    instance: Instance, ls: reduction.LineSystem, opts: SolveOptions
) -> Separation | None:
    if reduction.initial_domains(ls) is None:
        return None
    for delta in reduction.cell_type_maps(ls, instance):
        prepared = reduction.prepare_branch(ls, delta, instance)
        if prepared is None:
            _trace(opts, event="reject", stage="prepare")
            continue
        domains, situations = prepared
        active = [s for s in situations if s.active]
        support = reduction.branch_support(ls, delta, instance, situations, domains)
        all_cells = sorted(delta.delta)
        try:
            colorings = reduction.color_codings(
                instance, all_cells, opts.mode,
                trials=opts.trials, seed=opts.seed,
                relevant=sorted(support), support=support,
            )
            for phi in colorings:
                for combo in itertools.product(
                    *[list(reduction.situation_guesses(s)) for s in active]
                ):
                    out = reduction.emit(ls, delta, phi, combo, instance, prepared)
                    if isinstance(out, Rejected):
                        _trace(opts, event="reject", stage="emit", reason=out.reason)
                        continue
                    inst, backmap = out
                    _trace(
                        opts, event="csp", size=inst.apparent_size(),
                        vars=inst.n, constraints=len(inst.constraints),
                        situations=len(active),
                    )
                    asg = solve_forest(inst)
                    if asg is None:
                        continue
                    xs, ys = [], []
                    for var, (axis, values) in backmap.items():
                        (xs if axis == "x" else ys).append(values[asg[var] - 1])
                    sep = Separation(tuple(sorted(xs)), tuple(sorted(ys)))
                    assert verify_separation(instance, sep) is None, \
                        "emitted CSP admitted a non-separation"
                    return sep
        except reduction.ExhaustiveTooLarge:
            raise
    return None


def iterative_compression(
    instance: Instance, k: int, opts: SolveOptions = SolveOptions()
) -> Separation | None:
    """Decision search on a normalized instance by inserting points one at a
    time; any prefix without a size-k separation settles the answer."""
    points = sorted(instance.points(), key=lambda p: (p.x, p.y, p.label))
    current = Separation((), ())
    prefix1: list = []
    prefix2: list = []
    for p in points:
        (prefix1 if p.label == 1 else prefix2).append(p)
        prefix = Instance(tuple(prefix1), tuple(prefix2))
        if verify_separation(prefix, current) is None:
            continue
        boot = augment_separation(current, p)
        assert boot.size <= k + 4
        assert verify_separation(prefix, boot) is None
        sep = compress(prefix, boot.xs, boot.ys, k, opts)
        if sep is None:
            return None
        current = sep
    assert verify_separation(instance, current) is None
    return current


def solve_min(
    instance: Instance, opts: SolveOptions = SolveOptions()
) -> Separation:
    """Minimum separation of an arbitrary exact-coordinate instance.

    Normalizes, runs the decision search for k = 0, 1, 2, ... and maps the
    first success back to the original coordinates.  With exhaustive
    colorings the result is the exact optimum; with randomized colorings it
    is an upper bound that is exact whenever a trial coloring succeeded.
    """
    normal, maps = normalize(instance)
    k = sum(forced_line_bound(normal))
    while True:
        sep = iterative_compression(normal, k, opts)
        if sep is not None:
            out = denormalize_separation(sep, maps)
            assert verify_separation(instance, out) is None
            return out
        k += 1
        assert k <= 2 * normal.n + 2, "the full grid must separate everything"
