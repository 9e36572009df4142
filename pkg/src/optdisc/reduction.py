"""Reduction from separation search to forest CSP, one branch at a time.

A *branch* fixes everything about a hypothetical solution except the exact
line coordinates: extra bootstrap lines (``branch_a``), how many solution
lines sit in each bootstrap gap (``layouts``), which cells of the resulting
abstract grid are empty (``cell_type_maps``), a coloring guessing each
relevant point's cell (``color_codings``), and per high-alternation situation
the leader orders and leader cells (``situation_guesses``).  ``emit`` then
turns one fully guessed branch into a forest-CSP instance whose satisfying
assignments are exactly the line placements consistent with the branch; any
satisfying assignment maps back to a verified separation.

Everything here works on normalized instances: points on multiples of 3,
bootstrap ("apx") lines on values 1 mod 3, solution ("opt") lines on values
2 mod 3.
"""

from __future__ import annotations

import itertools
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .forest_csp import ForestCspInstance
from .geometry import Instance, Point, extremal_points
from .segrev import (
    DownwardClosedRelation,
    PartitionTree,
    RepresentedRelation,
    SegmentPartition,
    SegmentReversion,
    clause_relation,
    less_than_relation,
    make_seg_rep,
    InvalidLeafFamily,
)


class StructureViolation(Exception):
    """A verified block/epoch property failed: the guess is inconsistent."""


@dataclass(frozen=True)
class Rejected:
    reason: str


@dataclass(frozen=True)
class Line:
    kind: str              # "apx" | "opt"
    value: int | None      # coordinate, apx lines only
    var: int | None        # variable id, opt lines only


@dataclass(frozen=True)
class LineSystem:
    xs: tuple[Line, ...]
    ys: tuple[Line, ...]

    def axis(self, name: str) -> tuple[Line, ...]:
        return self.xs if name == "x" else self.ys

    @property
    def var_count(self) -> int:
        return sum(1 for ln in self.xs + self.ys if ln.kind == "opt")

    def var_info(self) -> dict[int, tuple[str, int]]:
        """var id -> (axis, position in that axis' line list)."""
        out = {}
        for name in ("x", "y"):
            for pos, ln in enumerate(self.axis(name)):
                if ln.kind == "opt":
                    out[ln.var] = (name, pos)
        return out

    def apx_values(self, name: str) -> list[int]:
        return [ln.value for ln in self.axis(name) if ln.kind == "apx"]

    def gap_bounds(self, name: str, pos: int) -> tuple[int, int]:
        """Nearest apx values strictly left/right of the line at ``pos``."""
        lines = self.axis(name)
        left = next(lines[i].value for i in range(pos - 1, -1, -1) if lines[i].kind == "apx")
        right = next(lines[i].value for i in range(pos + 1, len(lines)) if lines[i].kind == "apx")
        return left, right

    def columns(self, name: str) -> int:
        return len(self.axis(name)) - 1

    def col_apx_gap(self, name: str) -> list[int]:
        """Cell column index -> index of the apx gap containing it."""
        out = []
        seen_apx = 0
        for ln in self.axis(name)[:-1]:
            if ln.kind == "apx":
                seen_apx += 1
            out.append(seen_apx - 1)
        return out

    def col_opt_gap(self, name: str) -> list[int]:
        out = []
        seen_opt = 0
        for ln in self.axis(name)[:-1]:
            if ln.kind == "opt":
                seen_opt += 1
            out.append(seen_opt)
        return out


Cell = tuple[int, int]  # (column index, row index) in the abstract grid


@dataclass(frozen=True)
class CellTypeMap:
    delta: dict[Cell, int]

    def of(self, cell: Cell) -> int:
        return self.delta[cell]


# ---------------------------------------------------------------------------
# branching step A: extra bootstrap lines next to extremal points

def _apx_supercell_points(instance: Instance, x0: Sequence[int], y0: Sequence[int]):
    """Group points by (x-gap, y-gap) of the bootstrap grid."""
    cells: dict[tuple[int, int], list[Point]] = {}
    for p in instance.points():
        gx = bisect_right(x0, p.x) - 1
        gy = bisect_right(y0, p.y) - 1
        cells.setdefault((gx, gy), []).append(p)
    return cells

def branch_a(
    instance: Instance, x0: Sequence[int], y0: Sequence[int], depth_budget: int
) -> Iterator[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Enumerate bootstrap augmentations: next to each extremal point of each
    occupied bootstrap supercell, one extra line may be inserted, up to
    ``depth_budget`` times.  The unaugmented pair comes first."""
    seen = set()
    frontier = [(tuple(sorted(x0)), tuple(sorted(y0)))]
    for depth in range(depth_budget + 1):
        next_frontier = []
        for state in frontier:
            if state in seen:
                continue
            seen.add(state)
            yield state
            if depth == depth_budget:
                continue
            cx, cy = state
            for pts in _apx_supercell_points(instance, cx, cy).values():
                for p in extremal_points(pts).values():
                    next_frontier.append((tuple(sorted(set(cx) | {p.x + 1})), cy))
                    next_frontier.append((cx, tuple(sorted(set(cy) | {p.y + 1}))))
        frontier = next_frontier


# ---------------------------------------------------------------------------
# branching step B: layouts

def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def layouts(
    x0: Sequence[int], y0: Sequence[int], k: int
) -> Iterator[LineSystem]:
    """All ways to interleave at most ``k`` solution lines into the bootstrap
    gaps, by increasing total line count."""
    x0 = sorted(x0)
    y0 = sorted(y0)
    for total in range(k + 1):
        for kx in range(total + 1):
            ky = total - kx
            for cx in _compositions(kx, len(x0) - 1):
                for cy in _compositions(ky, len(y0) - 1):
                    var = itertools.count()
                    xs: list[Line] = []
                    for i, v in enumerate(x0):
                        xs.append(Line("apx", v, None))
                        if i < len(cx):
                            for _ in range(cx[i]):
                                xs.append(Line("opt", None, next(var)))
                    ys: list[Line] = []
                    for i, v in enumerate(y0):
                        ys.append(Line("apx", v, None))
                        if i < len(cy):
                            for _ in range(cy[i]):
                                ys.append(Line("opt", None, next(var)))
                    yield LineSystem(tuple(xs), tuple(ys))


def initial_domains(ls: LineSystem) -> dict[int, tuple[int, ...]] | None:
    """Per solution line, all values 2 mod 3 strictly inside its bootstrap
    gap.  None when some gap cannot host the lines guessed into it."""
    out: dict[int, tuple[int, ...]] = {}
    for name in ("x", "y"):
        lines = ls.axis(name)
        gap_count: dict[tuple[int, int], int] = {}
        for pos, ln in enumerate(lines):
            if ln.kind != "opt":
                continue
            lo, hi = ls.gap_bounds(name, pos)
            first = lo + 1 + (2 - (lo + 1)) % 3
            dom = tuple(range(first, hi, 3))
            if not dom:
                return None
            out[ln.var] = dom
            gap_count[(lo, hi)] = gap_count.get((lo, hi), 0) + 1
        for (lo, hi), cnt in gap_count.items():
            first = lo + 1 + (2 - (lo + 1)) % 3
            if cnt > len(range(first, hi, 3)):
                return None
    return out


# ---------------------------------------------------------------------------
# branching step C: cell types

def apx_supercell_classes(ls: LineSystem, instance: Instance) -> dict[tuple[int, int], int]:
    """Class (0/1/2) of every bootstrap supercell; the bootstrap grid is a
    separation, so supercells are pure."""
    xs = ls.apx_values("x")
    ys = ls.apx_values("y")
    out: dict[tuple[int, int], int] = {}
    for p in instance.points():
        gx = bisect_right(xs, p.x) - 1
        gy = bisect_right(ys, p.y) - 1
        prev = out.get((gx, gy), 0)
        assert prev in (0, p.label), "bootstrap lines do not separate the instance"
        out[(gx, gy)] = p.label
    return out


def cell_type_maps(ls: LineSystem, instance: Instance) -> Iterator[CellTypeMap]:
    """All cell-type guesses consistent with the bootstrap supercell classes.

    A cell inside a class-c supercell is 0 or c; a cell in an empty supercell
    is 0.  Guesses where a nonempty supercell has only 0-cells, or where one
    opt-supercell would contain cells of both classes, are skipped.
    """
    classes = apx_supercell_classes(ls, instance)
    col_gap_x = ls.col_apx_gap("x")
    col_gap_y = ls.col_apx_gap("y")
    opt_gap_x = ls.col_opt_gap("x")
    opt_gap_y = ls.col_opt_gap("y")
    ncols, nrows = ls.columns("x"), ls.columns("y")

    supercells: dict[tuple[int, int], list[Cell]] = {}
    for ci in range(ncols):
        for cj in range(nrows):
            supercells.setdefault((col_gap_x[ci], col_gap_y[cj]), []).append((ci, cj))

    groups = sorted(supercells.items())

    def rec(idx: int, delta: dict[Cell, int], opt_class: dict[tuple[int, int], int]):
        if idx == len(groups):
            yield CellTypeMap(dict(delta))
            return
        key, cells = groups[idx]
        cls = classes.get(key, 0)
        if cls == 0:
            for c in cells:
                delta[c] = 0
            yield from rec(idx + 1, delta, opt_class)
            return
        for pattern in itertools.product((0, cls), repeat=len(cells)):
            if all(t == 0 for t in pattern):
                continue
            touched = []
            ok = True
            for cell, t in zip(cells, pattern):
                delta[cell] = t
                if t == 0:
                    continue
                okey = (opt_gap_x[cell[0]], opt_gap_y[cell[1]])
                prev = opt_class.get(okey)
                if prev is None:
                    opt_class[okey] = t
                    touched.append(okey)
                elif prev != t:
                    ok = False
                    break
            if ok:
                yield from rec(idx + 1, delta, opt_class)
            for okey in touched:
                del opt_class[okey]
        return

    yield from rec(0, {}, {})


# ---------------------------------------------------------------------------
# branching step D: color coding

def plausible_cells(
    ls: LineSystem, delta: CellTypeMap, domains: dict[int, tuple[int, ...]],
    point: Point,
) -> list[Cell]:
    """Cells that could contain the point under some admissible line values."""
    out = []
    for (ci, cj), t in sorted(delta.delta.items()):
        if t != point.label:
            continue
        if _cell_can_contain(ls, domains, (ci, cj), point):
            out.append((ci, cj))
    return out


def _side_range(ls: LineSystem, domains, name: str, pos: int) -> tuple[int, int]:
    ln = ls.axis(name)[pos]
    if ln.kind == "apx":
        return ln.value, ln.value
    dom = domains[ln.var]
    return dom[0], dom[-1]


def _cell_can_contain(ls: LineSystem, domains, cell: Cell, point: Point) -> bool:
    ci, cj = cell
    llo, _ = _side_range(ls, domains, "x", ci)
    _, rhi = _side_range(ls, domains, "x", ci + 1)
    blo, _ = _side_range(ls, domains, "y", cj)
    _, thi = _side_range(ls, domains, "y", cj + 1)
    return llo < point.x < rhi and blo < point.y < thi


class ExhaustiveTooLarge(Exception):
    pass


def color_codings(
    instance: Instance,
    cells: Sequence[Cell],
    mode: str,
    *,
    trials: int = 64,
    seed: int = 0,
    relevant: Sequence[Point] | None = None,
    support: dict[Point, Sequence[Cell]] | None = None,
    cap: int = 200_000,
) -> Iterator[dict[Point, Cell]]:
    """Guessed point->cell maps for branching on extremal-point cells.

    ``relevant`` limits the map to the points any downstream filter will
    consult; other points never matter.  ``support`` optionally restricts a
    point's candidates to its plausible cells (the true cell is always
    plausible).  Randomized mode draws ``trials`` independent maps from the
    per-point supports, deterministically in ``seed``; exhaustive mode yields
    the full product, refusing above ``cap``.
    """
    import random

    cells = list(cells)
    if relevant is None:
        relevant = list(instance.points())
    pools = {}
    for p in relevant:
        pool = list(support[p]) if support and p in support else cells
        if not pool:
            return
        pools[p] = pool
    points = sorted(pools)
    if not points:
        yield {}
        return
    if mode == "exhaustive":
        total = 1
        for p in points:
            total *= len(pools[p])
            if total > cap:
                raise ExhaustiveTooLarge(f"{total} maps exceed cap {cap}")
        for combo in itertools.product(*(pools[p] for p in points)):
            yield dict(zip(points, combo))
    elif mode == "randomized":
        rng = random.Random(seed)
        for _ in range(trials):
            yield {p: rng.choice(pools[p]) for p in points}
    else:
        raise ValueError(f"unknown color-coding mode {mode!r}")


# ---------------------------------------------------------------------------
# situations

@dataclass(frozen=True)
class RowInfo:
    boundary: tuple          # ("apx", value) or ("opt", var) at the row bottom
    cj: int                  # cell row index in the *other* axis grid
    delta: int               # type of the row's area under the current guess


@dataclass(frozen=True)
class Situation:
    axis: str                # axis of the consecutive opt pair
    p1: int
    p2: int
    p1_pos: int
    p2_pos: int
    band_lo: int             # apx values bounding the strip on the other axis
    band_hi: int
    rows: tuple[RowInfo, ...]       # bottom-to-top in original orientation
    s_reduced: tuple[int, ...]
    alternation: int
    class_swap: bool
    vflip: bool
    points: tuple[tuple[int, int, int, Point], ...]  # (u, w, label, original)
    red_band_cells: tuple[tuple[Cell, ...], ...]     # canonical band i -> cells
    blue_band_cells: tuple[tuple[Cell, ...], ...]
    canonical_lines: tuple[tuple, ...]  # canonical ell^1..ell^{2r} boundary refs

    @property
    def active(self) -> bool:
        return self.alternation >= 4

    @property
    def r(self) -> int:
        return self.alternation // 2


def _reduce_sequence(values: Sequence[int]) -> tuple[int, ...]:
    out: list[int] = []
    for v in values:
        if v != 0 and (not out or out[-1] != v):
            out.append(v)
    return tuple(out)


def situation_list(
    ls: LineSystem, delta: CellTypeMap, instance: Instance
) -> list[Situation] | None:
    """All situations of both orientations; None rejects the whole branch
    (odd alternation above 1, or a high-alternation situation whose flanking
    bootstrap supercells are not of distinct nonzero classes)."""
    out: list[Situation] = []
    for axis in ("x", "y"):
        other = "y" if axis == "x" else "x"
        lines = ls.axis(axis)
        olines = ls.axis(other)
        opt_positions = [i for i, ln in enumerate(lines) if ln.kind == "opt"]
        for a, b in zip(opt_positions, opt_positions[1:]):
            if not any(lines[i].kind == "apx" for i in range(a + 1, b)):
                continue
            for oj in range(len(olines) - 1):
                if olines[oj].kind != "apx":
                    continue
                top = next(
                    (j for j in range(oj + 1, len(olines)) if olines[j].kind == "apx"),
                    None,
                )
                if top is None:
                    continue
                sit = _build_situation(ls, delta, instance, axis, a, b, oj, top)
                if sit is None:
                    return None
                out.append(sit)
    return out


def _area_delta(delta: CellTypeMap, cols: range, rows_cj: range) -> int:
    vals = {delta.of((ci, cj)) for ci in cols for cj in rows_cj}
    nz = vals - {0}
    assert len(nz) <= 1, "area crosses cells of both classes"
    return nz.pop() if nz else 0


def _build_situation(ls, delta, instance, axis, a, b, oj, top):
    """Situation for the opt pair at positions (a, b) on ``axis`` and the
    bootstrap strip between other-axis positions (oj, top); None rejects the
    branch."""
    other = "y" if axis == "x" else "x"
    lines = ls.axis(axis)
    olines = ls.axis(other)
    band_lo = olines[oj].value
    band_hi = olines[top].value

    rows = []
    for j in range(oj, top):
        ln = olines[j]
        boundary = ("apx", ln.value) if ln.kind == "apx" else ("opt", ln.var)
        if axis == "x":
            d = _area_delta(delta, range(a, b), range(j, j + 1))
        else:
            d = _area_delta(delta, range(j, j + 1), range(a, b))
        rows.append(RowInfo(boundary, j, d))
    s_full = tuple(r.delta for r in rows)
    s_red = _reduce_sequence(s_full)
    alternation = len(s_red)
    if alternation >= 3 and alternation % 2 == 1:
        return None

    if alternation < 4:
        return Situation(
            axis, lines[a].var, lines[b].var, a, b, band_lo, band_hi, tuple(rows),
            s_red, alternation, False, False, (), (), (), (),
        )

    # flanking bootstrap supercell classes (lemma on alternations)
    classes = apx_supercell_classes(ls, instance)
    apx_vals_axis = ls.apx_values(axis)
    apx_vals_other = ls.apx_values(other)
    gap_lo1, _ = ls.gap_bounds(axis, a)
    gap_lo2, _ = ls.gap_bounds(axis, b)
    g1 = apx_vals_axis.index(gap_lo1)
    g2 = apx_vals_axis.index(gap_lo2)
    grow = apx_vals_other.index(band_lo)
    if axis == "x":
        cls1 = classes.get((g1, grow), 0)
        cls2 = classes.get((g2, grow), 0)
    else:
        cls1 = classes.get((grow, g1), 0)
        cls2 = classes.get((grow, g2), 0)
    if cls1 == 0 or cls2 == 0 or cls1 == cls2:
        return None

    class_swap = cls1 == 2
    canon = tuple((2 if v == 1 else 1) for v in s_red) if class_swap else s_red
    if canon[0] == 1 and canon[-1] == 2:
        vflip = False
    elif canon[0] == 2 and canon[-1] == 1:
        vflip = True
    else:
        # even alternation starting and ending alike cannot happen
        raise AssertionError(f"unexpected reduced sequence {s_red}")

    pts = []
    for p in instance.points():
        u, w = (p.x, p.y) if axis == "x" else (p.y, p.x)
        if band_lo < w < band_hi and gap_lo1 < u:
            _, gap_hi2 = ls.gap_bounds(axis, b)
            if u < gap_hi2:
                pts.append((u, w, p.label, p))
    pts.sort(key=lambda t: (t[0], t[1], t[2]))

    red_cells, blue_cells, canon_lines = _canonical_bands(
        delta, axis, a, b, rows, class_swap, vflip, band_hi
    )
    return Situation(
        axis, lines[a].var, lines[b].var, a, b, band_lo, band_hi, tuple(rows),
        s_red, alternation, class_swap, vflip, tuple(pts),
        red_cells, blue_cells, canon_lines,
    )


def _canonical_bands(delta, axis, a, b, rows, class_swap, vflip, band_hi):
    """Alternating boundaries and per-band candidate leader cells, in the
    canonical frame (red on the left, reduced sequence (1 2)^r bottom-up)."""
    red_label = 2 if class_swap else 1

    view_rows = list(rows)
    if vflip:
        view_rows = view_rows[::-1]

    def view_delta(r: RowInfo) -> int:
        if r.delta == 0:
            return 0
        if class_swap:
            return 2 if r.delta == 1 else 1
        return r.delta

    # canonical boundary below view row i: for unflipped rows it is the row's
    # own bottom boundary; after a flip it is the *next* original row's bottom
    # (the flipped row's top edge)
    def view_boundary(i: int) -> tuple:
        if not vflip:
            return view_rows[i].boundary
        orig_index = len(rows) - 1 - i
        if orig_index + 1 < len(rows):
            return rows[orig_index + 1].boundary
        return ("apx", band_hi)  # the strip's top bootstrap line

    alternating: list[tuple] = []       # canonical ell^1..ell^{2r}
    band_rows: list[list[RowInfo]] = []  # canonical band index -> view rows
    last = 0
    for i, r in enumerate(view_rows):
        d = view_delta(r)
        if d == 0:
            if band_rows:
                band_rows[-1].append(r)
            continue
        if d != last:
            alternating.append(view_boundary(i))
            band_rows.append([r])
            last = d
        else:
            band_rows[-1].append(r)
    rr = len(alternating) // 2
    assert len(alternating) == 2 * rr

    red_cells = []
    blue_cells = []
    for band_index, rows_in_band in enumerate(band_rows):
        want = 1 if band_index % 2 == 0 else 2
        cells = []
        for r in rows_in_band:
            for ci in range(a, b):
                cell = (ci, r.cj) if axis == "x" else (r.cj, ci)
                if delta.of(cell) == (red_label if want == 1 else (3 - red_label)):
                    cells.append(cell)
        (red_cells if want == 1 else blue_cells).append(tuple(sorted(cells)))
    # trailing zero view-rows above the last band belong to the last blue band
    return tuple(red_cells[:rr]), tuple(blue_cells[:rr]), tuple(alternating)


def alternation_of_points(sit: Situation, x1: int, x2: int):
    """(length, reduced sequence) of the strip's class runs bottom-to-top, or
    None when two opposite-class points share a coordinate (infinite)."""
    strip = [(w, u, lbl) for (u, w, lbl, _) in sit.points if x1 < u < x2]
    strip.sort()
    for (w1, _, l1), (w2, _, l2) in zip(strip, strip[1:]):
        if w1 == w2 and l1 != l2:
            return None
    seq = _reduce_sequence([lbl for (_, _, lbl) in strip])
    return len(seq), seq


# ---------------------------------------------------------------------------
# fit profiles (alternation filtering)

FIT_TARGET = None  # per-situation: its own reduced sequence


def _fits(sit: Situation, x1: int, x2: int) -> bool:
    got = alternation_of_points(sit, x1, x2)
    return got is not None and got[1] == sit.s_reduced


@dataclass(frozen=True)
class FitProfile:
    dom1: tuple[int, ...]
    dom2: tuple[int, ...]
    lo: dict[int, int]    # x1 value -> least fitting x2 value
    hi: dict[int, int]
    lo1: dict[int, int]   # x2 value -> least fitting x1 value
    hi1: dict[int, int]


def fit_profile(
    sit: Situation, dom1: Sequence[int], dom2: Sequence[int]
) -> FitProfile:
    """Filter both domains down to values with a nonempty fitting set and
    record the fit segment bounds.  The fitting set per value is asserted to
    be contiguous and its bounds nondecreasing."""
    d1, d2 = list(dom1), list(dom2)
    while True:
        lo: dict[int, int] = {}
        hi: dict[int, int] = {}
        for x1 in d1:
            flags = [_fits(sit, x1, x2) for x2 in d2]
            if any(flags):
                first = flags.index(True)
                last = len(flags) - 1 - flags[::-1].index(True)
                assert all(flags[first:last + 1]), "fitting set is not contiguous"
                lo[x1] = d2[first]
                hi[x1] = d2[last]
        n1 = [x1 for x1 in d1 if x1 in lo]
        lo1: dict[int, int] = {}
        hi1: dict[int, int] = {}
        for x2 in d2:
            flags = [_fits(sit, x1, x2) for x1 in n1]
            if any(flags):
                first = flags.index(True)
                last = len(flags) - 1 - flags[::-1].index(True)
                assert all(flags[first:last + 1]), "fitting set is not contiguous"
                lo1[x2] = n1[first]
                hi1[x2] = n1[last]
        n2 = [x2 for x2 in d2 if x2 in lo1]
        if n1 == d1 and n2 == d2:
            break
        d1, d2 = n1, n2
    seq = [lo[x] for x in d1]
    assert all(a <= b for a, b in zip(seq, seq[1:])), "fit lower bound not monotone"
    seq = [hi[x] for x in d1]
    assert all(a <= b for a, b in zip(seq, seq[1:])), "fit upper bound not monotone"
    seq = [lo1[x] for x in d2]
    assert all(a <= b for a, b in zip(seq, seq[1:])), "fit lower bound not monotone"
    seq = [hi1[x] for x in d2]
    assert all(a <= b for a, b in zip(seq, seq[1:])), "fit upper bound not monotone"
    return FitProfile(tuple(d1), tuple(d2), lo, hi, lo1, hi1)


def alternation_constraint(
    sit: Situation, profile: FitProfile
) -> list[RepresentedRelation]:
    """Two depth-1 relations binding (p1, p2): together they admit exactly
    the fitting pairs (not below the fit segment, not above it)."""
    m1, m2 = len(profile.dom1), len(profile.dom2)
    idx2 = {v: i + 1 for i, v in enumerate(profile.dom2)}
    not_a = clause_relation(
        ("le", "ge"),
        [(a, idx2[profile.lo[x1]]) for a, x1 in enumerate(profile.dom1)],
        m1, m2,
    )
    not_b = clause_relation(
        ("ge", "le"),
        [(a + 2, idx2[profile.hi[x1]]) for a, x1 in enumerate(profile.dom1)],
        m1, m2,
    )
    return [not_a, not_b]


# ---------------------------------------------------------------------------
# situation guesses (leader orders and leader cells)

@dataclass(frozen=True)
class SituationGuess:
    pi1: tuple[int, ...]        # canonical red blocks by leader, rightmost first
    cells1: tuple[Cell, ...]    # canonical red band i -> guessed leader cell
    pi2: tuple[int, ...]        # canonical blue blocks by leader, leftmost first
    cells2: tuple[Cell, ...]


def situation_guesses(sit: Situation) -> Iterator[SituationGuess]:
    r = sit.r
    perms = list(itertools.permutations(range(1, r + 1)))
    for pi1 in perms:
        for cells1 in itertools.product(*sit.red_band_cells):
            for pi2 in perms:
                for cells2 in itertools.product(*sit.blue_band_cells):
                    yield SituationGuess(pi1, cells1, pi2, cells2)


# ---------------------------------------------------------------------------
# strip views: canonical and rotated frames of one situation

@dataclass(frozen=True)
class StripView:
    """A situation seen in a frame where red sits left, the reduced sequence
    reads (1 2)^r bottom-to-top, and the constrained line is side 1.

    The primary view realizes the canonicalization (optional class swap and
    vertical flip); the rotated view is the half-turn image that turns the
    blue-side constraints into red-side ones.
    """

    sit: Situation
    rotated: bool
    var1: int
    flip1: bool              # view index i <-> original index m+1-i
    var2: int
    flip2: bool
    s_u: int
    s_w: int
    red_label: int           # original class playing red in this view
    points: tuple[tuple[int, int, int, Point], ...]  # (u, w, viewlabel, orig)
    lines: tuple[tuple, ...]  # view ell^1..ell^{2r}: ("apx", value-ish) or ("opt", var, flipped)

    @property
    def r(self) -> int:
        return self.sit.r

    def dom1_view(self, domains) -> list[int]:
        return sorted(self.s_u * v for v in domains[self.var1])

    def dom2_view(self, domains) -> list[int]:
        return sorted(self.s_u * v for v in domains[self.var2])

    def to_original_1(self, view_value: int) -> int:
        return self.s_u * view_value

    def guess(self, g: SituationGuess) -> tuple[tuple[int, ...], tuple[Cell, ...], tuple[int, ...]]:
        """(pi-red, cells-red, pi-blue) for this view's red side."""
        r = self.r
        if not self.rotated:
            return g.pi1, g.cells1, g.pi2
        pi_red = tuple(r + 1 - p for p in g.pi2)
        cells_red = tuple(reversed(g.cells2))
        pi_blue = tuple(r + 1 - p for p in g.pi1)
        return pi_red, cells_red, pi_blue


def make_views(sit: Situation) -> tuple[StripView, StripView]:
    base_sw = -1 if sit.vflip else 1
    base_red = 2 if sit.class_swap else 1
    r = sit.r

    def transformed(s_u, s_w, red_label):
        pts = []
        for (u, w, lbl, p) in sit.points:
            view_label = 1 if lbl == red_label else 2
            pts.append((s_u * u, s_w * w, view_label, p))
        pts.sort(key=lambda t: (t[0], t[1], t[2]))
        return tuple(pts)

    def flipline(ref, flipped):
        if ref[0] == "apx":
            return ref
        return ("opt", ref[1], flipped)

    primary = StripView(
        sit, False, sit.p1, False, sit.p2, False, 1, base_sw, base_red,
        transformed(1, base_sw, base_red),
        tuple(flipline(ref, sit.vflip) for ref in sit.canonical_lines),
    )
    rot_lines = [("apx", sit.band_hi if not sit.vflip else sit.band_lo)]
    for ref in reversed(sit.canonical_lines[1:]):
        rot_lines.append(flipline(ref, not sit.vflip))
    rotated = StripView(
        sit, True, sit.p2, True, sit.p1, True, -1, -base_sw, 3 - base_red,
        transformed(-1, -base_sw, 3 - base_red),
        tuple(rot_lines),
    )
    return primary, rotated


def _view_strip(view: StripView, x1: int, x2: int):
    pts = [(w, u, lbl, p) for (u, w, lbl, p) in view.points if x1 < u < x2]
    pts.sort(key=lambda t: (t[0], t[1]))
    return pts


def _view_fits(view: StripView, x1: int, x2: int) -> bool:
    strip = _view_strip(view, x1, x2)
    for (w1, _, l1, _), (w2, _, l2, _) in zip(strip, strip[1:]):
        if w1 == w2 and l1 != l2:
            return False
    seq = _reduce_sequence([lbl for (_, _, lbl, _) in strip])
    return seq == (1, 2) * view.r


def _view_fit_lo(view: StripView, x1: int, dom2v: Sequence[int]) -> int | None:
    for x2 in dom2v:
        if _view_fits(view, x1, x2):
            return x2
    return None


def blocks_and_leaders(view: StripView, x1: int, x2: int):
    """Red blocks of the strip at (x1, x2), bottom-to-top, with leaders.

    Returns (blocks, leaders): blocks as lists of (u, w, viewlabel, point),
    leaders as the per-block (u, w)-maximum entries (rightmost elements).
    """
    strip = _view_strip(view, x1, x2)
    blocks: list[list] = []
    last = 0
    for (w, u, lbl, p) in strip:
        if lbl == 1:
            if last != 1:
                blocks.append([])
            blocks[-1].append((u, w, lbl, p))
        last = lbl
    leaders = [max(b, key=lambda t: (t[0], t[1])) for b in blocks]
    return blocks, leaders


def extremal_order_filter(
    view: StripView,
    guess: SituationGuess,
    phi: dict[Point, Cell],
    dom1v: Sequence[int],
    dom2v: Sequence[int],
) -> list[int]:
    """Surviving view values of side 1: the right-to-left leader order must
    match the guessed permutation and every leader must be colored with its
    band's guessed cell."""
    pi_red, cells_red, _ = view.guess(guess)
    r = view.r
    out = []
    for x1 in dom1v:
        x2 = _view_fit_lo(view, x1, dom2v)
        if x2 is None:
            continue
        blocks, leaders = blocks_and_leaders(view, x1, x2)
        assert len(blocks) == r, "fitting strip must have exactly r red runs"
        order = sorted(range(1, r + 1),
                       key=lambda j: (leaders[j - 1][0], leaders[j - 1][1]),
                       reverse=True)
        if tuple(order) != pi_red:
            continue
        if any(phi.get(leaders[i - 1][3]) != cells_red[i - 1] for i in range(1, r + 1)):
            continue
        out.append(x1)
    return out


def view_relevant_leaders(
    view: StripView, dom1v: Sequence[int], dom2v: Sequence[int]
) -> set[Point]:
    """Points that can appear as a red-block leader for some surviving value;
    exactly the points whose coloring the order filter may consult."""
    out: set[Point] = set()
    for x1 in dom1v:
        x2 = _view_fit_lo(view, x1, dom2v)
        if x2 is None:
            continue
        _, leaders = blocks_and_leaders(view, x1, x2)
        out.update(t[3] for t in leaders)
    return out


# ---------------------------------------------------------------------------
# block tree, epochs, and the alternating-lines gadget

def build_block_tree(pi1: tuple[int, ...], pi2: tuple[int, ...]) -> dict[int, int | None]:
    """Parent map on blocks 1..r: a block merges into the neighbor whose
    separating strip holds the rightmost leftmost-blue-leader."""
    r = len(pi1)
    pos1 = {j: i for i, j in enumerate(pi1)}
    pos2 = {j: i for i, j in enumerate(pi2)}
    parent: dict[int, int | None] = {pi1[0]: None}
    for j in range(1, r + 1):
        if j == pi1[0]:
            continue
        below = [i for i in range(j - 1, 0, -1) if pos1[i] < pos1[j]]
        above = [i for i in range(j + 1, r + 1) if pos1[i] < pos1[j]]
        i1 = below[0] if below else None
        i2 = above[0] if above else None
        if i1 is None:
            parent[j] = i2
        elif i2 is None:
            parent[j] = i1
        else:
            m1 = min(pos2[t] for t in range(i1, j))
            m2 = min(pos2[t] for t in range(j, i2))
            assert m1 != m2
            parent[j] = i1 if m1 > m2 else i2
    return parent


@dataclass(frozen=True)
class EpochStructure:
    parent: dict[int, int | None]
    partitions: dict[int, SegmentPartition]   # block -> epochs over dom1 index
    leaders: dict[int, tuple]                 # block -> per-index leader entry
    f_top: dict[int, tuple[int, ...]]         # block -> per-index top w
    f_bot: dict[int, tuple[int, ...]]


def epoch_structure(
    view: StripView,
    guess: SituationGuess,
    dom1v: Sequence[int],
    dom2v: Sequence[int],
) -> EpochStructure:
    """Per-block epoch partitions with the structural checks that make the
    alternating-lines gadget valid; raises StructureViolation when the guess
    is inconsistent with the geometry."""
    pi_red, _, pi_blue = view.guess(guess)
    r = view.r
    parent = build_block_tree(pi_red, pi_blue)
    m = len(dom1v)
    if m == 0:
        raise StructureViolation("empty domain")

    leaders_by_block: dict[int, list] = {j: [] for j in range(1, r + 1)}
    top: dict[int, list[int]] = {j: [] for j in range(1, r + 1)}
    bot: dict[int, list[int]] = {j: [] for j in range(1, r + 1)}
    lead_of: dict[Point, int] = {}
    prev_blocks = None
    for x1 in dom1v:
        x2 = _view_fit_lo(view, x1, dom2v)
        assert x2 is not None, "order filtering must precede epoch construction"
        blocks, leaders = blocks_and_leaders(view, x1, x2)
        # the red block partition does not depend on the fitting x2 choice
        hi = max(v for v in dom2v if _view_fits(view, x1, v))
        blocks_hi, _ = blocks_and_leaders(view, x1, hi)
        assert [b for b in blocks] == [b for b in blocks_hi], \
            "red blocks depend on the fitting partner value"
        if prev_blocks is not None:
            for nb in blocks:
                assert any(set(p for (_, _, _, p) in nb) <= prev for prev in prev_blocks), \
                    "blocks at a larger value must nest into earlier blocks"
        prev_blocks = [set(p for (_, _, _, p) in b) for b in blocks]
        for j in range(1, r + 1):
            e = leaders[j - 1][3]
            was = lead_of.get(e)
            if was is not None and was != j:
                raise StructureViolation("a point leads two different blocks")
            lead_of[e] = j
            leaders_by_block[j].append(e)
            top[j].append(max(w for (_, w, _, _) in blocks[j - 1]))
            bot[j].append(min(w for (_, w, _, _) in blocks[j - 1]))

    partitions: dict[int, SegmentPartition] = {}
    for j in range(1, r + 1):
        bounds = [1]
        for i in range(1, m):
            if leaders_by_block[j][i] != leaders_by_block[j][i - 1]:
                bounds.append(i + 1)
        bounds.append(m + 1)
        partitions[j] = SegmentPartition(m, tuple(dict.fromkeys(bounds)))

    root = pi_red[0]
    if len(partitions[root].boundaries) != 2 and m > 0:
        raise StructureViolation("root block leader is not constant")
    for j, p in parent.items():
        if p is not None and not partitions[p].coarser_than(partitions[j]):
            raise StructureViolation("parent epochs do not refine toward the leaves")

    _check_epoch_extents(parent, partitions, top, bot, r)
    return EpochStructure(
        parent, partitions, {j: tuple(leaders_by_block[j]) for j in leaders_by_block},
        {j: tuple(v) for j, v in top.items()}, {j: tuple(v) for j, v in bot.items()},
    )


def _subtree(parent: dict[int, int | None], j: int) -> list[int]:
    out = [j]
    grow = True
    while grow:
        grow = False
        for k, p in parent.items():
            if p in out and k not in out:
                out.append(k)
                grow = True
    return out


def _check_epoch_extents(parent, partitions, top, bot, r) -> None:
    """Consecutive epochs of a child inside one parent epoch must carry
    disjoint strictly monotone y-extents (above the parent when the child is
    higher, below otherwise)."""
    for j, p in parent.items():
        if p is None:
            continue
        sub = _subtree(parent, j)
        extents = []
        for lo, hi in partitions[j].segments():
            lo0 = min(bot[t][i - 1] for t in sub for i in range(lo, hi + 1))
            hi0 = max(top[t][i - 1] for t in sub for i in range(lo, hi + 1))
            extents.append((lo, hi, lo0, hi0))
        for plo, phi_ in partitions[p].segments():
            inside = [e for e in extents if plo <= e[0] and e[1] <= phi_]
            for (la, ha, lo_a, hi_a), (lb, hb, lo_b, hi_b) in zip(inside, inside[1:]):
                if j < p:
                    ok = hi_a < lo_b
                else:
                    ok = hi_b < lo_a
                if not ok:
                    raise StructureViolation("epoch extents are not monotone")


@dataclass(frozen=True)
class AuxConstraint:
    """One binary constraint ready for the forest translation: per side, the
    variable and the reversions applied first-to-last on its domain index."""

    var1: int
    chain1: tuple[SegmentReversion, ...]
    var2: int
    chain2: tuple[SegmentReversion, ...]
    rel: DownwardClosedRelation


def _squeeze(chain: Sequence[SegmentReversion]) -> tuple[SegmentReversion, ...]:
    # adjacent equal reversions cancel (every reversion is an involution)
    out: list[SegmentReversion] = []
    for g in chain:
        if g.is_identity():
            continue
        if out and out[-1] == g:
            out.pop()
            continue
        out.append(g)
    return tuple(out)


def alternating_lines_gadgets(
    view: StripView,
    guess: SituationGuess,
    es: EpochStructure,
    domains: dict[int, tuple[int, ...]],
) -> list[AuxConstraint]:
    """Constraints pinning every alternating line above/below its red block.

    The per-block epoch partitions form a tree of segment partitions; the
    factorization of the block-top/bottom functions through per-node
    reversions makes each constraint's core downwards-closed.  Edge labels
    are conjugated by their ancestor chains so that walking the (shared)
    clone tree applies the factorization's reversions in the right order.
    """
    pi_red, _, _ = view.guess(guess)
    r = view.r
    dom1v = view.dom1_view(domains)
    m1 = len(dom1v)

    # partition tree: blocks then (top, bottom) leaves per block
    node_of_block = {j: j - 1 for j in range(1, r + 1)}
    parent: list[int | None] = [None] * (3 * r)
    partitions: list[SegmentPartition] = [None] * (3 * r)
    types: list[str | None] = [None] * (3 * r)
    for j in range(1, r + 1):
        p = es.parent[j]
        parent[j - 1] = None if p is None else node_of_block[p]
        partitions[j - 1] = es.partitions[j]
        types[j - 1] = None if p is None else ("inc" if j < p else "dec")
    leaf_v = {}
    leaf_u = {}
    for j in range(1, r + 1):
        v_id = r + 2 * (j - 1)
        u_id = v_id + 1
        leaf_v[j], leaf_u[j] = v_id, u_id
        parent[v_id] = parent[u_id] = node_of_block[j]
        partitions[v_id] = partitions[u_id] = SegmentPartition.singletons(m1)
        types[v_id], types[u_id] = "dec", "inc"
    tree = PartitionTree(m1, tuple(parent), tuple(partitions), tuple(types))

    big = 2 * (max((abs(w) for (_, w, _, _) in view.points), default=1) + m1 + 2)
    leaf_fns = {}
    for j in range(1, r + 1):
        leaf_fns[leaf_v[j]] = tuple(
            es.f_top[j][i] * big - (i + 1) for i in range(m1)
        )
        leaf_fns[leaf_u[j]] = tuple(
            es.f_bot[j][i] * big + (i + 1) for i in range(m1)
        )
    try:
        revs, _tails = make_seg_rep(tree, leaf_fns)
    except InvalidLeafFamily as e:
        raise StructureViolation(str(e)) from e

    # conjugate each node's reversion by its strict-ancestor chain so that a
    # root-to-leaf walk applies the factorization reversions leaf-innermost
    amap: dict[int, list[int]] = {tree.root: list(range(1, m1 + 1))}
    order = [tree.root]
    labels: dict[int, SegmentReversion] = {}
    while order:
        node = order.pop()
        for child in tree.children(node):
            if node == tree.root:
                amap[child] = list(range(1, m1 + 1))
            else:
                g_parent = revs[node]
                amap[child] = [amap[node][g_parent.apply(x) - 1] for x in range(1, m1 + 1)]
            a = amap[child]
            inv = [0] * m1
            for x in range(1, m1 + 1):
                inv[a[x - 1] - 1] = x
            g = revs[child]
            labels[child] = SegmentReversion.from_mapping(
                m1, [a[g.apply(inv[x - 1]) - 1] for x in range(1, m1 + 1)]
            )
            order.append(child)

    def walk_data(leaf: int):
        path = tree.path_to_root(leaf)[:-1]  # leaf .. root-child
        chain = [labels[w] for w in reversed(path)]
        walked = list(range(1, m1 + 1))
        for g in chain:
            walked = [g.apply(x) for x in walked]
        # sanity: the walk equals the factorization chain applied leaf-first
        probe = list(range(1, m1 + 1))
        for w in path:
            probe = [revs[w].apply(x) for x in probe]
        assert walked == probe, "conjugated walk disagrees with the factorization"
        return chain, walked

    def line_side(index: int):
        ref = view.lines[index - 1]
        assert ref[0] == "opt", "only interior alternating lines carry constraints"
        _, var, flipped = ref
        s_w = view.s_w
        yv = sorted(s_w * v for v in domains[var])
        return var, flipped, yv

    side_prefix = [SegmentReversion.full(m1)] if view.flip1 else []
    out: list[AuxConstraint] = []
    for i in range(1, r + 1):
        # the line starting blue band i stays above red block i
        chain, walked = walk_data(leaf_v[i])
        var, flipped, yv = line_side(2 * i)
        m2 = len(yv)
        bound = [0] * m1
        for x in range(1, m1 + 1):
            bound[walked[x - 1] - 1] = es.f_top[i][x - 1]
        assert all(a <= b for a, b in zip(bound, bound[1:]))
        frontier = tuple(m2 - bisect_right(yv, b) for b in bound)
        out.append(AuxConstraint(
            view.var1, _squeeze(side_prefix + chain),
            var, _squeeze([] if flipped else [SegmentReversion.full(m2)]),
            DownwardClosedRelation(m1, m2, frontier),
        ))
        if i == 1:
            continue
        # the line starting red band i stays below red block i
        chain, walked = walk_data(leaf_u[i])
        var, flipped, yv = line_side(2 * i - 1)
        m2 = len(yv)
        bound = [0] * m1
        for x in range(1, m1 + 1):
            s = m1 + 1 - walked[x - 1]
            bound[s - 1] = es.f_bot[i][x - 1]
        assert all(a >= b for a, b in zip(bound, bound[1:]))
        frontier = tuple(bisect_left(yv, b) for b in bound)
        out.append(AuxConstraint(
            view.var1, _squeeze(side_prefix + chain + [SegmentReversion.full(m1)]),
            var, _squeeze([SegmentReversion.full(m2)] if flipped else []),
            DownwardClosedRelation(m1, m2, frontier),
        ))
    return out


# ---------------------------------------------------------------------------
# corner filtering and corner constraints

def _corner_tuples(ls: LineSystem, axis: str):
    """Pairs of positions on ``axis`` with no apx line strictly between."""
    lines = ls.axis(axis)
    apx_pos = [i for i, ln in enumerate(lines) if ln.kind == "apx"]
    for a, b in zip(apx_pos, apx_pos[1:]):
        for i in range(a, b + 1):
            for j in range(i + 1, b + 1):
                yield i, j


def _cells_all_empty(ls, delta, xi, xj, yi, yj) -> bool:
    return all(
        delta.of((ci, cj)) == 0 for ci in range(xi, xj) for cj in range(yi, yj)
    )


def _fixed_bounds(ls, axis, i, j):
    lines = ls.axis(axis)
    lo = lines[i].value if lines[i].kind == "apx" else None
    hi = lines[j].value if lines[j].kind == "apx" else None
    return lo, hi


def corner_filter_domains(
    ls: LineSystem,
    delta: CellTypeMap,
    instance: Instance,
    domains: dict[int, tuple[int, ...]],
) -> dict[int, tuple[int, ...]] | None:
    """Apply the zero- and one-opt-line empty-corner rules.

    A fully bootstrap-bounded region guessed empty but containing a point
    rejects the branch (None); a region with one solution-line border filters
    that line's domain to the values keeping the region point-free.
    """
    pts = instance.points()
    domains = dict(domains)
    for xi, xj in _corner_tuples(ls, "x"):
        for yi, yj in _corner_tuples(ls, "y"):
            opts = [
                (axis, pos, role)
                for axis, pos, role in (
                    ("x", xi, "lo"), ("x", xj, "hi"), ("y", yi, "lo"), ("y", yj, "hi"),
                )
                if ls.axis(axis)[pos].kind == "opt"
            ]
            if len(opts) > 1:
                continue
            if not _cells_all_empty(ls, delta, xi, xj, yi, yj):
                continue
            xlo, xhi = _fixed_bounds(ls, "x", xi, xj)
            ylo, yhi = _fixed_bounds(ls, "y", yi, yj)
            if not opts:
                if any(xlo < p.x < xhi and ylo < p.y < yhi for p in pts):
                    return None
                continue
            axis, pos, role = opts[0]
            var = ls.axis(axis)[pos].var
            keep = []
            for v in domains[var]:
                bounds = {
                    ("x", "lo"): (v, xhi, ylo, yhi),
                    ("x", "hi"): (xlo, v, ylo, yhi),
                    ("y", "lo"): (xlo, xhi, v, yhi),
                    ("y", "hi"): (xlo, xhi, ylo, v),
                }[(axis, role)]
                blo, bhi, clo, chi = bounds
                if not any(blo < p.x < bhi and clo < p.y < chi for p in pts):
                    keep.append(v)
            domains[var] = tuple(keep)
            if not keep:
                return None
    return domains


def corner_constraints(
    ls: LineSystem,
    delta: CellTypeMap,
    instance: Instance,
    domains: dict[int, tuple[int, ...]],
) -> list[AuxConstraint]:
    """Clause constraints for empty corners with two solution-line borders.

    For two same-axis solution borders only the corner with the maximal far
    border is kept; monotonicity implies the rest.  Corners with more than
    two solution borders are out of reach by definition (cells bounded by
    four solution lines need no constraint at all).
    """
    pts = instance.points()
    out: list[AuxConstraint] = []

    def emit_corner(sides):
        # sides: ((axis, role, ("apx", value) | ("opt", var)), ...) of all four
        opt_sides = [s for s in sides if s[2][0] == "opt"]
        fixed = [s for s in sides if s[2][0] == "apx"]
        (a1, r1, (_, v1)), (a2, r2, (_, v2)) = opt_sides
        kind = ("ge" if r1 == "lo" else "le", "ge" if r2 == "lo" else "le")
        d1, d2 = domains[v1], domains[v2]
        clauses = []
        for p in pts:
            inside = True
            for axis, role, (knd, val) in fixed:
                c = p.x if axis == "x" else p.y
                if role == "lo" and not val < c:
                    inside = False
                if role == "hi" and not c < val:
                    inside = False
            if not inside:
                continue
            th = []
            for axis, role, (_, var) in opt_sides:
                c = p.x if axis == "x" else p.y
                dom = domains[var]
                if role == "lo":
                    th.append(bisect_right(dom, c) + 1)  # first index with value > c
                else:
                    th.append(bisect_left(dom, c))       # last index with value < c
            clauses.append(tuple(th))
        if not clauses:
            return
        rel = clause_relation(kind, clauses, len(d1), len(d2))
        chain1 = rel.rep1.application_order()
        chain2 = rel.rep2.application_order()
        out.append(AuxConstraint(v1, chain1, v2, chain2, rel.rel))

    def side(axis, pos, role):
        ln = ls.axis(axis)[pos]
        desc = ("apx", ln.value) if ln.kind == "apx" else ("opt", ln.var)
        return (axis, role, desc)

    x_tuples = list(_corner_tuples(ls, "x"))
    y_tuples = list(_corner_tuples(ls, "y"))
    for xi, xj in x_tuples:
        for yi, yj in y_tuples:
            sides = (
                side("x", xi, "lo"), side("x", xj, "hi"),
                side("y", yi, "lo"), side("y", yj, "hi"),
            )
            n_opt = sum(1 for s in sides if s[2][0] == "opt")
            if n_opt != 2:
                continue
            if not _cells_all_empty(ls, delta, xi, xj, yi, yj):
                continue
            opt_axes = [s[0] for s in sides if s[2][0] == "opt"]
            if opt_axes[0] == opt_axes[1]:
                # same-axis pair: keep only the maximal far border
                axis = opt_axes[0]
                if axis == "x":
                    wider = any(
                        xj2 > xj and xi2 == xi and _cells_all_empty(ls, delta, xi2, xj2, yi, yj)
                        and ls.axis("x")[xj2].kind == "opt"
                        for xi2, xj2 in x_tuples
                    )
                else:
                    wider = any(
                        yj2 > yj and yi2 == yi and _cells_all_empty(ls, delta, xi, xj, yi2, yj2)
                        and ls.axis("y")[yj2].kind == "opt"
                        for yi2, yj2 in y_tuples
                    )
                if wider:
                    continue
            emit_corner(sides)
    return out


# ---------------------------------------------------------------------------
# branch preparation and emission

def prepare_branch(
    ls: LineSystem, delta: CellTypeMap, instance: Instance
) -> tuple[dict[int, tuple[int, ...]], list[Situation]] | None:
    """Guess-independent setup for one (layout, cell-type) branch: initial
    domains, corner filtering, situations, and the fit-filter fixpoint.
    None rejects the branch."""
    domains = initial_domains(ls)
    if domains is None:
        return None
    domains = corner_filter_domains(ls, delta, instance, domains)
    if domains is None:
        return None
    situations = situation_list(ls, delta, instance)
    if situations is None:
        return None
    active = [s for s in situations if s.active]
    while True:
        changed = False
        for sit in active:
            prof = fit_profile(sit, domains[sit.p1], domains[sit.p2])
            if not prof.dom1 or not prof.dom2:
                return None
            if prof.dom1 != domains[sit.p1]:
                domains[sit.p1] = prof.dom1
                changed = True
            if prof.dom2 != domains[sit.p2]:
                domains[sit.p2] = prof.dom2
                changed = True
        if not changed:
            break
    return domains, situations


def branch_support(
    ls: LineSystem,
    delta: CellTypeMap,
    instance: Instance,
    situations: list[Situation],
    domains: dict[int, tuple[int, ...]],
) -> dict[Point, list[Cell]]:
    """Points whose coloring the branch will consult, with their plausible
    cells.  Only potential block leaders of active situations matter."""
    support: dict[Point, list[Cell]] = {}
    for sit in situations:
        if not sit.active:
            continue
        for view in make_views(sit):
            d1v = view.dom1_view(domains)
            d2v = view.dom2_view(domains)
            for p in view_relevant_leaders(view, d1v, d2v):
                if p not in support:
                    support[p] = plausible_cells(ls, delta, domains, p)
    return support


class ForestBuilder:
    """Accumulates variables, shared clone chains, and constraints."""

    def __init__(self):
        self.dom: list[int] = []
        self.names: list[object] = []
        self.tables: list[tuple | None] = []
        self.edges: list[tuple[int, int, SegmentReversion]] = []
        self.cons: list[tuple[int, int, DownwardClosedRelation]] = []
        self._memo: dict[tuple[int, tuple[int, ...]], int] = {}

    def add_variable(self, name, values: Sequence[int]) -> int:
        self.dom.append(len(values))
        self.names.append(name)
        self.tables.append(tuple(values))
        return len(self.dom) - 1

    def chain_end(self, base: int, revs: Sequence[SegmentReversion]) -> int:
        node = base
        for g in revs:
            if g.is_identity():
                continue
            key = (node, g.boundaries)
            hit = self._memo.get(key)
            if hit is not None:
                node = hit
                continue
            self.dom.append(g.m)
            self.names.append(("clone", node, g.boundaries))
            self.tables.append(None)
            new = len(self.dom) - 1
            self.edges.append((node, new, g))
            self._memo[key] = new
            node = new
        return node

    def add_aux(self, c: AuxConstraint) -> None:
        u = self.chain_end(c.var1, c.chain1)
        v = self.chain_end(c.var2, c.chain2)
        self.cons.append((u, v, c.rel))

    def build(self) -> ForestCspInstance:
        return ForestCspInstance(
            tuple(self.dom), tuple(self.edges), tuple(self.cons),
            tuple(self.names), tuple(self.tables),
        )


def apparent_size_cap(ls: LineSystem) -> int:
    """Emitted instances stay quadratic in the line count; the constant is
    pinned by a regression test over the branch corpus."""
    lines = len(ls.xs) + len(ls.ys)
    return 12 * lines * lines + 16


def emit(
    ls: LineSystem,
    delta: CellTypeMap,
    phi: dict[Point, Cell],
    guesses: Sequence[SituationGuess],
    instance: Instance,
    prepared: tuple[dict[int, tuple[int, ...]], list[Situation]] | None = None,
):
    """Assemble one fully guessed branch into a forest-CSP instance.

    Returns ``(instance, backmap)`` with ``backmap`` mapping each solution
    line variable to ``(axis, value_table)``, or :class:`Rejected`.
    """
    prepared = prepare_branch(ls, delta, instance) if prepared is None else prepared
    if prepared is None:
        return Rejected("base filtering emptied the branch")
    domains, situations = prepared
    domains = dict(domains)
    active = [s for s in situations if s.active]
    if len(guesses) != len(active):
        raise ValueError("one guess per active situation required")

    # interleave order filtering with fit refiltering until stable
    while True:
        changed = False
        for sit, guess in zip(active, guesses):
            prof = fit_profile(sit, domains[sit.p1], domains[sit.p2])
            if not prof.dom1 or not prof.dom2:
                return Rejected("fit filtering emptied a domain")
            if prof.dom1 != domains[sit.p1]:
                domains[sit.p1] = prof.dom1
                changed = True
            if prof.dom2 != domains[sit.p2]:
                domains[sit.p2] = prof.dom2
                changed = True
            for view in make_views(sit):
                d1v = view.dom1_view(domains)
                d2v = view.dom2_view(domains)
                keep = extremal_order_filter(view, guess, phi, d1v, d2v)
                keep_orig = tuple(sorted(view.to_original_1(v) for v in keep))
                if not keep_orig:
                    return Rejected("order filtering emptied a domain")
                if keep_orig != tuple(domains[view.var1]):
                    domains[view.var1] = keep_orig
                    changed = True
        if not changed:
            break

    builder = ForestBuilder()
    info = ls.var_info()
    for var in sorted(info):
        builder.add_variable(("line", var), domains[var])

    aux: list[AuxConstraint] = []
    for name in ("x", "y"):
        lines = ls.axis(name)
        opts = [i for i, ln in enumerate(lines) if ln.kind == "opt"]
        for i, j in zip(opts, opts[1:]):
            if any(lines[t].kind == "apx" for t in range(i + 1, j)):
                continue  # ordering across a bootstrap line is forced by domains
            v1, v2 = lines[i].var, lines[j].var
            g, rel = less_than_relation(domains[v1], domains[v2])
            aux.append(AuxConstraint(v1, (), v2, (g,), rel))

    aux.extend(corner_constraints(ls, delta, instance, domains))

    try:
        for sit, guess in zip(active, guesses):
            prof = fit_profile(sit, domains[sit.p1], domains[sit.p2])
            assert prof.dom1 == tuple(domains[sit.p1])
            assert prof.dom2 == tuple(domains[sit.p2])
            for rel in alternation_constraint(sit, prof):
                aux.append(AuxConstraint(
                    sit.p1, rel.rep1.application_order(),
                    sit.p2, rel.rep2.application_order(),
                    rel.rel,
                ))
            for view in make_views(sit):
                d1v = view.dom1_view(domains)
                d2v = view.dom2_view(domains)
                es = epoch_structure(view, guess, d1v, d2v)
                aux.extend(alternating_lines_gadgets(view, guess, es, domains))
    except StructureViolation as e:
        return Rejected(f"structure violation: {e}")

    for c in aux:
        builder.add_aux(c)
    inst = builder.build()
    assert inst.apparent_size() <= apparent_size_cap(ls), "emitted instance too large"
    backmap = {var: (info[var][0], tuple(domains[var])) for var in info}
    return inst, backmap
