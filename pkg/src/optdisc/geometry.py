"""Exact planar instances, separations, and coordinate normalization.

An instance is two disjoint labeled point sets with exact coordinates
(integers or fractions; no floats).  ``normalize`` rescales so that the i-th
smallest distinct coordinate per axis becomes ``3*i``: points then sit on
multiples of 3 inside ``[3n]``, candidate solution lines on values that are
2 mod 3, and approximate/bootstrap lines on values that are 1 mod 3, which
keeps every later computation in machine integers.
"""

from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence


class OverlapError(ValueError):
    """The same coordinate pair appears in both classes."""


class EmptySet(ValueError):
    pass


class FormatError(ValueError):
    """Malformed instance or separation file."""


Coord = Fraction | int


@dataclass(frozen=True, order=True)
class Point:
    x: Coord
    y: Coord
    label: int

    def __post_init__(self) -> None:
        if self.label not in (1, 2):
            raise ValueError(f"label must be 1 or 2, got {self.label}")


@dataclass(frozen=True)
class Instance:
    w1: tuple[Point, ...]
    w2: tuple[Point, ...]

    def __post_init__(self) -> None:
        coords1 = {(p.x, p.y) for p in self.w1}
        coords2 = {(p.x, p.y) for p in self.w2}
        both = coords1 & coords2
        if both:
            raise OverlapError(f"points in both classes: {sorted(both)[:3]}")

    @staticmethod
    def from_points(w1: Iterable[tuple], w2: Iterable[tuple]) -> "Instance":
        """Build from coordinate pairs; duplicates within a class are dropped."""
        p1 = sorted({(exact(x), exact(y)) for x, y in w1})
        p2 = sorted({(exact(x), exact(y)) for x, y in w2})
        return Instance(
            tuple(Point(x, y, 1) for x, y in p1),
            tuple(Point(x, y, 2) for x, y in p2),
        )

    @property
    def n(self) -> int:
        return len(self.w1) + len(self.w2)

    def points(self) -> tuple[Point, ...]:
        return self.w1 + self.w2


@dataclass(frozen=True)
class Separation:
    xs: tuple[Coord, ...]
    ys: tuple[Coord, ...]

    def __post_init__(self) -> None:
        for vals in (self.xs, self.ys):
            if any(a >= b for a, b in zip(vals, vals[1:])):
                raise ValueError("line coordinates must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.xs) + len(self.ys)


@dataclass(frozen=True)
class CoordMaps:
    """Sorted original distinct coordinates per axis; rank i (1-based) maps to
    normalized value 3*i and back."""

    xs: tuple[Coord, ...]
    ys: tuple[Coord, ...]


def exact(value) -> Coord:
    """Parse an exact coordinate: int, Fraction, or a decimal/fraction string."""
    if isinstance(value, bool):
        raise FormatError(f"not a coordinate: {value!r}")
    if isinstance(value, (int, Fraction)):
        return value
    if isinstance(value, str):
        try:
            f = Fraction(value)
        except (ValueError, ZeroDivisionError) as e:
            raise FormatError(f"not an exact coordinate: {value!r}") from e
        return int(f) if f.denominator == 1 else f
    if isinstance(value, float):
        raise FormatError(
            f"refusing float coordinate {value!r}; pass a decimal string instead"
        )
    raise FormatError(f"not a coordinate: {value!r}")


def normalize(instance: Instance) -> tuple[Instance, CoordMaps]:
    """Rescale coordinates to the canonical integer grid (multiples of 3)."""
    xs = tuple(sorted({p.x for p in instance.points()}))
    ys = tuple(sorted({p.y for p in instance.points()}))

    def ranked(points):
        return tuple(
            Point(3 * (bisect_left(xs, p.x) + 1), 3 * (bisect_left(ys, p.y) + 1), p.label)
            for p in points
        )

    return Instance(ranked(instance.w1), ranked(instance.w2)), CoordMaps(xs, ys)


def denormalize_separation(sep: Separation, maps: CoordMaps) -> Separation:
    """Map normalized lines back to original space, at gap midpoints.

    A line between normalized ranks i and i+1 lands on the midpoint of the
    two original coordinates; a line outside all ranks lands one unit outside
    the extreme coordinate.
    """

    def back(vals, originals):
        out = []
        for v in vals:
            hi = bisect_right([3 * (i + 1) for i in range(len(originals))], v)
            # v lies strictly between rank hi and rank hi+1 (1-based)
            if hi == 0:
                out.append(originals[0] - 1)
            elif hi == len(originals):
                out.append(originals[-1] + 1)
            else:
                out.append(Fraction(originals[hi - 1] + originals[hi], 2))
        return tuple(out)

    return Separation(back(sep.xs, maps.xs), back(sep.ys, maps.ys))


def verify_separation(instance: Instance, sep: Separation):
    """None when every cross-class pair is split, else the first bad pair.

    A pair is split when some x-line lies strictly between the two
    x-coordinates or some y-line lies strictly between the two y-coordinates.
    """

    def split(vals, a, b) -> bool:
        lo, hi = (a, b) if a < b else (b, a)
        i = bisect_right(vals, lo)
        return i < len(vals) and vals[i] < hi

    for p1 in instance.w1:
        for p2 in instance.w2:
            if not split(sep.xs, p1.x, p2.x) and not split(sep.ys, p1.y, p2.y):
                return (p1, p2)
    return None


def extremal_points(points: Sequence[Point]) -> dict[str, Point]:
    """Topmost/bottommost/leftmost/rightmost under the lexicographic orders
    (x, then y) for left/right and (y, then x) for top/bottom."""
    pts = list(points)
    if not pts:
        raise EmptySet("no points")
    by_x = lambda p: (p.x, p.y)
    by_y = lambda p: (p.y, p.x)
    return {
        "left": min(pts, key=by_x),
        "right": max(pts, key=by_x),
        "bottom": min(pts, key=by_y),
        "top": max(pts, key=by_y),
    }


def generate_planted(seed: int, kx: int, ky: int, points_per_cell: int) -> Instance:
    """Random instance separable by a planted (kx, ky) grid of lines.

    Cells of the grid are assigned classes in a checkerboard-with-noise
    pattern and filled with ``points_per_cell`` integer points; the planted
    grid itself is a separation, so the optimum is at most ``kx + ky``.
    """
    import random

    if kx < 0 or ky < 0 or points_per_cell < 0:
        raise ValueError("kx, ky, points_per_cell must be nonnegative")
    rng = random.Random(seed)
    span = 10
    w1, w2 = [], []
    for i in range(kx + 1):
        for j in range(ky + 1):
            cls = 1 + (i + j) % 2 if rng.random() < 0.8 else rng.choice((1, 2))
            seen = set()
            for _ in range(points_per_cell):
                x = i * span + rng.randint(1, span - 1)
                y = j * span + rng.randint(1, span - 1)
                if (x, y) in seen:
                    continue
                seen.add((x, y))
                (w1 if cls == 1 else w2).append((x, y))
    w1 = [p for p in w1 if p not in set(w2)]
    return Instance.from_points(w1, w2)


# ---------------------------------------------------------------------------
# serialization

def _coord_to_json(v: Coord):
    if isinstance(v, int) or v.denominator == 1:
        return int(v)
    d = v.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d == 1:
        # terminating decimal expansion
        from decimal import Decimal
        return str(Decimal(v.numerator) / Decimal(v.denominator))
    return f"{v.numerator}/{v.denominator}"


def instance_to_json(instance: Instance) -> str:
    obj = {
        "w1": [[_coord_to_json(p.x), _coord_to_json(p.y)] for p in instance.w1],
        "w2": [[_coord_to_json(p.x), _coord_to_json(p.y)] for p in instance.w2],
    }
    return json.dumps(obj)


def instance_from_json(text: str) -> Instance:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"bad JSON: {e}") from e
    if not isinstance(obj, dict) or "w1" not in obj or "w2" not in obj:
        raise FormatError('instance JSON must be {"w1": [...], "w2": [...]}')

    def pairs(rows):
        out = []
        for row in rows:
            if not isinstance(row, (list, tuple)) or len(row) != 2:
                raise FormatError(f"bad point row: {row!r}")
            out.append((exact(row[0]), exact(row[1])))
        return out

    return Instance.from_points(pairs(obj["w1"]), pairs(obj["w2"]))


def instance_from_lines(text: str) -> Instance:
    """One point per line: ``<label> <x> <y>``; '#' starts a comment."""
    w1, w2 = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in ("1", "2"):
            raise FormatError(f"line {lineno}: expected '<label> <x> <y>'")
        target = w1 if parts[0] == "1" else w2
        target.append((exact(parts[1]), exact(parts[2])))
    return Instance.from_points(w1, w2)


def separation_to_json(sep: Separation) -> str:
    return json.dumps(
        {"xs": [_coord_to_json(v) for v in sep.xs], "ys": [_coord_to_json(v) for v in sep.ys]}
    )


def separation_from_json(text: str) -> Separation:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"bad JSON: {e}") from e
    if not isinstance(obj, dict) or "xs" not in obj or "ys" not in obj:
        raise FormatError('separation JSON must be {"xs": [...], "ys": [...]}')
    xs = tuple(sorted(exact(v) for v in obj["xs"]))
    ys = tuple(sorted(exact(v) for v in obj["ys"]))
    return Separation(xs, ys)
