"""Segment reversions, downwards-closed relations, and segment representations.

Every finite ordered domain in this module is canonical: ``{1, 2, ..., m}``
with the integer order.  Callers that work with concrete coordinate sets keep
a separate sorted value table and translate values to ranks before calling in.

A *segment reversion* is the involution that partitions ``{1..m}`` into
contiguous segments and reverses each segment in place.  A *downwards-closed
relation* ``R`` on ``{1..m1} x {1..m2}`` is closed under decreasing either
coordinate; it is stored as a nonincreasing frontier where ``(a, b) in R``
iff ``b <= frontier[a]``.  Compositions of reversions with a nondecreasing
tail ("segment representations") express the order-twisted relations that the
forest-CSP solver consumes.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Mapping, Sequence


class OutOfDomain(ValueError):
    pass


class NotMonotone(ValueError):
    pass


class InvalidLeafFamily(ValueError):
    pass


def _check_boundaries(m: int, boundaries: Sequence[int]) -> None:
    if m < 0:
        raise ValueError(f"domain size must be >= 0, got {m}")
    b = tuple(boundaries)
    if m == 0:
        if b != (1,):
            raise ValueError("empty domain must have boundaries (1,)")
        return
    if b[0] != 1 or b[-1] != m + 1 or any(x >= y for x, y in zip(b, b[1:])):
        raise ValueError(f"bad boundaries {b} for domain size {m}")


@dataclass(frozen=True)
class SegmentPartition:
    """Partition of ``{1..m}`` into contiguous segments.

    ``boundaries`` is the strictly increasing tuple ``1 = a_1 < ... < a_r = m+1``;
    segment ``i`` is ``{a_i, ..., a_{i+1} - 1}``.
    """

    m: int
    boundaries: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_boundaries(self.m, self.boundaries)

    @staticmethod
    def whole(m: int) -> "SegmentPartition":
        return SegmentPartition(m, (1, m + 1) if m > 0 else (1,))

    @staticmethod
    def singletons(m: int) -> "SegmentPartition":
        return SegmentPartition(m, tuple(range(1, m + 2)))

    @staticmethod
    def from_segments(m: int, segments: Sequence[tuple[int, int]]) -> "SegmentPartition":
        """Build from inclusive (lo, hi) segments covering {1..m} in order."""
        return SegmentPartition(m, tuple(lo for lo, _ in segments) + (m + 1,))

    def segments(self) -> list[tuple[int, int]]:
        b = self.boundaries
        return [(b[i], b[i + 1] - 1) for i in range(len(b) - 1)]

    def segment_of(self, x: int) -> tuple[int, int]:
        if not 1 <= x <= self.m:
            raise OutOfDomain(f"{x} not in 1..{self.m}")
        i = bisect_right(self.boundaries, x) - 1
        return (self.boundaries[i], self.boundaries[i + 1] - 1)

    def coarser_than(self, other: "SegmentPartition") -> bool:
        """True iff every segment of `other` lies inside a segment of self."""
        return set(self.boundaries) <= set(other.boundaries)


@dataclass(frozen=True)
class SegmentReversion:
    """Involution of ``{1..m}`` that independently reverses contiguous segments.

    With boundaries ``1 = a_1 < ... < a_r = m+1``, an element ``x`` in segment
    ``i`` (``a_i <= x < a_{i+1}``) maps to ``a_{i+1} - 1 - (x - a_i)``.
    """

    m: int
    boundaries: tuple[int, ...]

    def __post_init__(self) -> None:
        _check_boundaries(self.m, self.boundaries)

    @staticmethod
    def identity(m: int) -> "SegmentReversion":
        return SegmentReversion(m, tuple(range(1, m + 2)))

    @staticmethod
    def full(m: int) -> "SegmentReversion":
        return SegmentReversion(m, (1, m + 1) if m > 0 else (1,))

    @staticmethod
    def from_mapping(m: int, images: Sequence[int]) -> "SegmentReversion":
        """Build from the image table ``images[x-1] = pi(x)``; validates shape."""
        boundaries = [1]
        x = 1
        while x <= m:
            hi = images[x - 1]
            if hi < x:
                raise ValueError("image table is not a segment reversion")
            for off in range(hi - x + 1):
                if images[x - 1 + off] != hi - off:
                    raise ValueError("image table is not a segment reversion")
            x = hi + 1
            boundaries.append(x)
        if m == 0:
            boundaries = [1]
        return SegmentReversion(m, tuple(boundaries))

    def apply(self, x: int) -> int:
        if not 1 <= x <= self.m:
            raise OutOfDomain(f"{x} not in 1..{self.m}")
        i = bisect_right(self.boundaries, x) - 1
        return self.boundaries[i + 1] - 1 - (x - self.boundaries[i])

    def segments(self) -> list[tuple[int, int]]:
        b = self.boundaries
        return [(b[i], b[i + 1] - 1) for i in range(len(b) - 1)]

    def is_identity(self) -> bool:
        return len(self.boundaries) == self.m + 1

    def is_full(self) -> bool:
        return self.boundaries == ((1, self.m + 1) if self.m > 0 else (1,))

    def as_partition(self) -> SegmentPartition:
        return SegmentPartition(self.m, self.boundaries)


def reversal_of_partition(p: SegmentPartition) -> SegmentReversion:
    """The segment reversion that reverses exactly the segments of ``p``."""
    return SegmentReversion(p.m, p.boundaries)


def apply_chain(revs: Sequence[SegmentReversion], x: int) -> int:
    """Apply reversions in listed order (``revs[0]`` first)."""
    for g in revs:
        x = g.apply(x)
    return x


@dataclass(frozen=True)
class DownwardClosedRelation:
    """Relation on ``{1..m1} x {1..m2}`` closed under decreasing coordinates.

    ``(a, b)`` is in the relation iff ``1 <= b <= frontier[a-1]``; the frontier
    is nonincreasing.  Frontier value 0 means the row has no admissible partner.
    """

    m1: int
    m2: int
    frontier: tuple[int, ...]

    def __post_init__(self) -> None:
        f = self.frontier
        if len(f) != self.m1:
            raise ValueError("frontier length must equal m1")
        if any(not 0 <= v <= self.m2 for v in f):
            raise ValueError("frontier values out of range")
        if any(f[i] < f[i + 1] for i in range(len(f) - 1)):
            raise ValueError("frontier must be nonincreasing")

    @staticmethod
    def fullrel(m1: int, m2: int) -> "DownwardClosedRelation":
        return DownwardClosedRelation(m1, m2, (m2,) * m1)

    @staticmethod
    def emptyrel(m1: int, m2: int) -> "DownwardClosedRelation":
        return DownwardClosedRelation(m1, m2, (0,) * m1)

    @staticmethod
    def from_predicate(m1: int, m2: int, pred) -> "DownwardClosedRelation":
        """Build from a membership predicate; fails if it is not downwards-closed."""
        frontier = []
        for a in range(1, m1 + 1):
            best = 0
            for b in range(1, m2 + 1):
                if pred(a, b):
                    if b != best + 1:
                        raise ValueError("predicate is not downwards-closed in b")
                    best = b
            frontier.append(best)
        return DownwardClosedRelation(m1, m2, tuple(frontier))

    def contains(self, a: int, b: int) -> bool:
        if not (1 <= a <= self.m1 and 1 <= b <= self.m2):
            raise OutOfDomain(f"({a},{b}) not in 1..{self.m1} x 1..{self.m2}")
        return b <= self.frontier[a - 1]

    def transpose(self) -> "DownwardClosedRelation":
        f = self.frontier
        new = tuple(sum(1 for v in f if v >= b) for b in range(1, self.m2 + 1))
        return DownwardClosedRelation(self.m2, self.m1, new)


@dataclass(frozen=True)
class SegmentRepresentation:
    """A map written as ``tail o pi_1 o pi_2 o ... o pi_k`` (pi_k applied first).

    With ``tail=None`` this represents the permutation part alone; otherwise
    ``tail`` is an integer table indexed by the permuted element.
    """

    reversions: tuple[SegmentReversion, ...]
    tail: tuple[int, ...] | None = None

    @property
    def depth(self) -> int:
        return len(self.reversions)

    def apply(self, x: int) -> int:
        for g in reversed(self.reversions):
            x = g.apply(x)
        if self.tail is not None:
            return self.tail[x - 1]
        return x

    def application_order(self) -> tuple[SegmentReversion, ...]:
        """Reversions in the order they are applied to the argument."""
        return tuple(reversed(self.reversions))


@dataclass(frozen=True)
class RepresentedRelation:
    """Binary relation given by per-side segment representations over a
    downwards-closed core: ``(a, b)`` is in the relation iff
    ``(rep1(a), rep2(b))`` is in ``rel``."""

    rep1: SegmentRepresentation
    rep2: SegmentRepresentation
    rel: DownwardClosedRelation

    @property
    def depth(self) -> int:
        return self.rep1.depth + self.rep2.depth

    def contains(self, a: int, b: int) -> bool:
        return self.rel.contains(self.rep1.apply(a), self.rep2.apply(b))


def less_than_relation(
    values1: Sequence[int], values2: Sequence[int]
) -> tuple[SegmentReversion, DownwardClosedRelation]:
    """Encode ``values1[a] < values2[b]`` with one full reversal on side 2.

    Returns ``(g, R)`` with ``g`` the full reversal of ``{1..m2}`` such that
    the pair ``(a, b)`` satisfies the inequality iff ``(a, g(b)) in R``.
    """
    m1, m2 = len(values1), len(values2)
    if any(x >= y for x, y in zip(values1, values1[1:])) or any(
        x >= y for x, y in zip(values2, values2[1:])
    ):
        raise NotMonotone("value tables must be strictly increasing")
    g = SegmentReversion.full(m2)
    frontier = []
    for a in range(1, m1 + 1):
        # admissible b form the up-set {b : values2[b] > values1[a]}
        t = bisect_right(values2, values1[a - 1]) + 1
        frontier.append(m2 + 1 - t if t <= m2 else 0)
    return g, DownwardClosedRelation(m1, m2, tuple(frontier))


_KINDS = {("le", "le"), ("le", "ge"), ("ge", "le"), ("ge", "ge")}


def clause_relation(
    kind: tuple[str, str],
    clauses: Sequence[tuple[int, int]],
    m1: int,
    m2: int,
) -> RepresentedRelation:
    """Conjunction of clauses ``(x1 cmp1 a_j) or (x2 cmp2 b_j)`` as a relation.

    ``kind`` picks the comparison pair, e.g. ``("le", "ge")`` means every
    clause reads ``(x1 <= a_j) or (x2 >= b_j)``.  The result carries a full
    reversal on each ``ge`` side and a downwards-closed core (depth 0/1/1/2
    for le-le / le-ge / ge-le / ge-ge).
    """
    if kind not in _KINDS:
        raise ValueError(f"unknown clause kind {kind}")
    flip1, flip2 = kind[0] == "ge", kind[1] == "ge"
    flipped = []
    for a, b in clauses:
        if not (0 <= a <= m1 + 1 and 0 <= b <= m2 + 1):
            raise OutOfDomain(f"clause threshold ({a},{b}) outside domains")
        fa = m1 + 1 - a if flip1 else a
        fb = m2 + 1 - b if flip2 else b
        flipped.append((fa, fb))
    # In flipped coordinates every clause is (u <= fa) or (v <= fb):
    # allowed v-bound at u is the min fb over clauses with fa < u.
    flipped.sort()
    frontier = []
    bound = m2
    j = 0
    for u in range(1, m1 + 1):
        while j < len(flipped) and flipped[j][0] < u:
            bound = min(bound, max(flipped[j][1], 0))
            j += 1
        frontier.append(min(bound, m2))
    rep1 = SegmentRepresentation((SegmentReversion.full(m1),) if flip1 else ())
    rep2 = SegmentRepresentation((SegmentReversion.full(m2),) if flip2 else ())
    return RepresentedRelation(rep1, rep2, DownwardClosedRelation(m1, m2, tuple(frontier)))


def _check_nondecreasing(f: Sequence[int]) -> None:
    if any(f[i] > f[i + 1] for i in range(len(f) - 1)):
        raise NotMonotone(f"table {f} is not nondecreasing")


def seg_swap(
    f: Sequence[int], g: SegmentReversion
) -> tuple[tuple[int, ...], SegmentReversion]:
    """Swap a nondecreasing table past a reversion: ``g o f = f' o g'``.

    ``f`` maps ``{1..m1}`` into ``{1..g.m}``.  Returns the nondecreasing
    ``f'`` and the reversion ``g'`` on ``{1..m1}`` whose segments are the
    preimage intervals ``[c_i, d_i]`` of the segments of ``g``.
    """
    m1 = len(f)
    _check_nondecreasing(f)
    if m1 and not (1 <= min(f) and max(f) <= g.m):
        raise OutOfDomain("table values leave the reversion's domain")
    boundaries = [1]
    for lo, hi in g.segments():
        c = bisect_left(f, lo) + 1      # min x with f(x) >= lo
        d = bisect_right(f, hi)         # max x with f(x) <= hi
        if c <= d:
            boundaries.append(d + 1)
    if m1 == 0:
        boundaries = [1]
    g_prime = SegmentReversion(m1, tuple(boundaries))
    f_prime = tuple(g.apply(f[g_prime.apply(x) - 1]) for x in range(1, m1 + 1))
    _check_nondecreasing(f_prime)
    return f_prime, g_prime


def dc_compose(f: Sequence[int], r: DownwardClosedRelation) -> DownwardClosedRelation:
    """Pull a relation back through a nondecreasing table on the first side:
    the result contains ``(x, y)`` iff ``(f(x), y)`` is in ``r``."""
    _check_nondecreasing(f)
    if f and not (1 <= min(f) and max(f) <= r.m1):
        raise OutOfDomain("table values leave the relation's first domain")
    return DownwardClosedRelation(len(f), r.m2, tuple(r.frontier[v - 1] for v in f))


def dc_compose_second(f: Sequence[int], r: DownwardClosedRelation) -> DownwardClosedRelation:
    """Mirror of :func:`dc_compose` acting on the second side."""
    return dc_compose(f, r.transpose()).transpose()


@dataclass(frozen=True)
class PartitionTree:
    """Rooted tree of nested segment partitions over a shared domain ``{1..m}``.

    ``parent[v]`` is ``None`` exactly at the root.  The root carries the
    one-segment partition, every leaf the all-singleton partition, and each
    parent partition is coarser than its child's.  Non-root nodes carry a
    ``type`` tag in ``{"inc", "dec"}``.
    """

    m: int
    parent: tuple[int | None, ...]
    partitions: tuple[SegmentPartition, ...]
    types: tuple[str | None, ...]

    def __post_init__(self) -> None:
        n = len(self.parent)
        if len(self.partitions) != n or len(self.types) != n:
            raise ValueError("parent/partitions/types lengths differ")
        roots = [v for v, p in enumerate(self.parent) if p is None]
        if len(roots) != 1:
            raise ValueError("tree must have exactly one root")
        root = roots[0]
        if self.partitions[root].boundaries != SegmentPartition.whole(self.m).boundaries:
            raise ValueError("root partition must be the one-segment partition")
        for v in range(n):
            p = self.parent[v]
            if (self.types[v] is None) != (p is None):
                raise ValueError("type tags must be set exactly on non-root nodes")
            if p is not None:
                if self.types[v] not in ("inc", "dec"):
                    raise ValueError(f"bad type tag {self.types[v]!r}")
                if not self.partitions[p].coarser_than(self.partitions[v]):
                    raise ValueError(f"partition at {p} is not coarser than at {v}")
        for v in self.leaves():
            if self.partitions[v].boundaries != SegmentPartition.singletons(self.m).boundaries:
                raise ValueError("leaf partitions must be all-singletons")
        # reject cycles / forests disguised as trees
        for v in range(n):
            seen = {v}
            u = self.parent[v]
            while u is not None:
                if u in seen:
                    raise ValueError("parent pointers contain a cycle")
                seen.add(u)
                u = self.parent[u]

    @property
    def root(self) -> int:
        return next(v for v, p in enumerate(self.parent) if p is None)

    def children(self, v: int) -> list[int]:
        return [u for u, p in enumerate(self.parent) if p == v]

    def leaves(self) -> list[int]:
        has_child = set(p for p in self.parent if p is not None)
        return [v for v in range(len(self.parent)) if v not in has_child]

    def path_to_root(self, v: int) -> list[int]:
        path = [v]
        while self.parent[path[-1]] is not None:
            path.append(self.parent[path[-1]])
        return path


def _validate_leaf_family(tree: PartitionTree, leaf_fns: Mapping[int, Sequence[int]]) -> None:
    for v, f in leaf_fns.items():
        if len(f) != tree.m:
            raise InvalidLeafFamily(f"leaf table at {v} has wrong length")
        for w in tree.path_to_root(v)[:-1]:
            want_inc = tree.types[w] == "inc"
            parent_part = tree.partitions[tree.parent[w]]
            child_part = tree.partitions[w]
            for qlo, qhi in parent_part.segments():
                prev_hi = None
                x = qlo
                while x <= qhi:
                    slo, shi = child_part.segment_of(x)
                    seg_min = min(f[i - 1] for i in range(slo, shi + 1))
                    seg_max = max(f[i - 1] for i in range(slo, shi + 1))
                    if prev_hi is not None:
                        ok = prev_hi < seg_min if want_inc else prev_hi > seg_max
                        if not ok:
                            raise InvalidLeafFamily(
                                f"leaf {v}: values across segments of node {w} are not "
                                f"strictly {'increasing' if want_inc else 'decreasing'}"
                            )
                    prev_hi = seg_max if want_inc else seg_min
                    x = shi + 1


def make_seg_rep(
    tree: PartitionTree, leaf_fns: Mapping[int, Sequence[int]]
) -> tuple[dict[int, SegmentReversion], dict[int, tuple[int, ...]]]:
    """Factor a family of leaf functions through per-node segment reversions.

    For every leaf ``v`` with root path ``v = v_1, ..., v_b = root`` the
    returned reversions and strictly increasing tails satisfy

        ``f_v = fhat_v o g_{v_{b-1}} o ... o g_{v_1}``

    (rightmost applied first).  A node's reversion is the identity unless the
    node is *pivotal* (its type differs from its parent's, or it is a
    ``dec``-typed child of the root); a pivotal node reverses its parent's
    partition.  Raises :class:`InvalidLeafFamily` when ``leaf_fns`` violates
    the ordering condition of a family of leaf functions.
    """
    leaves = set(tree.leaves())
    if set(leaf_fns) != leaves:
        raise InvalidLeafFamily("leaf_fns keys must be exactly the leaves of the tree")
    _validate_leaf_family(tree, leaf_fns)

    root = tree.root
    reversions: dict[int, SegmentReversion] = {}
    for w in range(len(tree.parent)):
        if w == root:
            continue
        p = tree.parent[w]
        pivotal = (p == root and tree.types[w] == "dec") or (
            p != root and tree.types[w] != tree.types[p]
        )
        if pivotal:
            reversions[w] = reversal_of_partition(tree.partitions[p])
        else:
            reversions[w] = SegmentReversion.identity(tree.m)

    tails: dict[int, tuple[int, ...]] = {}
    for v in leaves:
        path = tree.path_to_root(v)[:-1]  # v_1 .. v_{b-1}
        fhat = []
        for x in range(1, tree.m + 1):
            y = x
            for w in reversed(path):
                y = reversions[w].apply(y)
            fhat.append(leaf_fns[v][y - 1])
        if any(fhat[i] >= fhat[i + 1] for i in range(len(fhat) - 1)):
            raise InvalidLeafFamily(f"tail at leaf {v} is not strictly increasing")
        tails[v] = tuple(fhat)
        for x in range(1, tree.m + 1):
            y = x
            for w in path:
                y = reversions[w].apply(y)
            assert tails[v][y - 1] == leaf_fns[v][x - 1], "factorization identity failed"
    return reversions, tails
