import random
from fractions import Fraction

import pytest

from optdisc.geometry import (
    CoordMaps,
    EmptySet,
    FormatError,
    Instance,
    OverlapError,
    Point,
    Separation,
    denormalize_separation,
    exact,
    extremal_points,
    generate_planted,
    instance_from_json,
    instance_from_lines,
    instance_to_json,
    normalize,
    separation_from_json,
    separation_to_json,
    verify_separation,
)
from optdisc.oracle import min_separation_bruteforce


def inst(w1, w2):
    return Instance.from_points(w1, w2)


class TestParsing:
    def test_exact(self):
        assert exact(3) == 3
        assert exact("0.5") == Fraction(1, 2)
        assert exact("1/3") == Fraction(1, 3)
        assert exact("7") == 7 and isinstance(exact("7"), int)
        with pytest.raises(FormatError):
            exact(0.5)
        with pytest.raises(FormatError):
            exact("abc")

    def test_overlap_rejected(self):
        with pytest.raises(OverlapError):
            inst([(1, 1)], [(1, 1)])

    def test_dedup_within_class(self):
        i = inst([(1, 1), (1, 1), (2, 2)], [(3, 3)])
        assert i.n == 3

    def test_json_roundtrip(self):
        i = inst([("0.5", "0.5")], [(7, 7)])
        assert instance_from_json(instance_to_json(i)) == i

    def test_line_format(self):
        text = "# comment\n1 0.5 0.5\n2 7 7  # trailing\n"
        i = instance_from_lines(text)
        assert i == inst([("0.5", "0.5")], [(7, 7)])
        with pytest.raises(FormatError):
            instance_from_lines("3 1 2")

    def test_separation_json_roundtrip(self):
        sep = Separation((Fraction(15, 4),), (2,))
        assert separation_from_json(separation_to_json(sep)) == sep


class TestNormalize:
    def test_two_distinct_values(self):
        i, maps = normalize(inst([("0.5", "0.5")], [(7, 7)]))
        assert i == inst([(3, 3)], [(6, 6)])
        assert maps.xs == (Fraction(1, 2), 7)

    def test_shared_x_collapses(self):
        i, _ = normalize(inst([(3, 3)], [(3, 9)]))
        assert i == inst([(3, 3)], [(3, 6)])

    def test_random_properties(self):
        rng = random.Random(2)
        for _ in range(50):
            pts = {(rng.randint(0, 30), rng.randint(0, 30)) for _ in range(10)}
            pts = sorted(pts)[:10]
            half = len(pts) // 2
            try:
                i0 = inst(pts[:half], pts[half:])
            except OverlapError:
                continue
            i, maps = normalize(i0)
            coords = [c for p in i.points() for c in (p.x, p.y)]
            assert all(c % 3 == 0 and 3 <= c <= 3 * i.n for c in coords)
            # order preserved per axis
            for orig, normed in zip(i0.points(), i.points()):
                pass
            xs0 = [p.x for p in i0.w1 + i0.w2]
            xs1 = [p.x for p in i.w1 + i.w2]
            for a in range(len(xs0)):
                for b in range(len(xs0)):
                    assert (xs0[a] < xs0[b]) == (xs1[a] < xs1[b])

    def test_normalize_preserves_optimum(self):
        rng = random.Random(4)
        for _ in range(25):
            pts = list({(rng.randint(0, 8), rng.randint(0, 8)) for _ in range(8)})
            rng.shuffle(pts)
            half = len(pts) // 2
            i0 = inst(pts[:half], pts[half:])
            i1, _ = normalize(i0)
            s0 = min_separation_bruteforce(i0)
            s1 = min_separation_bruteforce(i1)
            assert s0.size == s1.size


class TestDenormalize:
    def test_midpoint(self):
        maps = CoordMaps((Fraction(1, 2), 7), (Fraction(1, 2), 7))
        out = denormalize_separation(Separation((4,), ()), maps)
        assert out.xs == (Fraction(15, 4),)

    def test_empty(self):
        maps = CoordMaps((1,), (1,))
        assert denormalize_separation(Separation((), ()), maps) == Separation((), ())

    def test_outside_extremes(self):
        maps = CoordMaps((5, 9), (5,))
        out = denormalize_separation(Separation((1, 8), (4,)), maps)
        assert out.xs == (4, 10) and out.ys == (6,)

    def test_denormalized_solution_verifies(self):
        rng = random.Random(6)
        for _ in range(25):
            pts = list({(rng.randint(0, 9), rng.randint(0, 9)) for _ in range(8)})
            half = len(pts) // 2
            i0 = inst(pts[:half], pts[half:])
            i1, maps = normalize(i0)
            s1 = min_separation_bruteforce(i1)
            back = denormalize_separation(
                Separation(
                    tuple(int(v) if v == int(v) else v for v in s1.xs),
                    tuple(int(v) if v == int(v) else v for v in s1.ys),
                ),
                maps,
            )
            assert verify_separation(i0, back) is None

    def test_denorm_needs_integral_lines(self):
        # brute-force lines on normalized instances are half-integers between
        # multiples of 3; shift them onto integers first
        i0 = inst([(0, 0)], [(1, 1)])
        i1, maps = normalize(i0)
        sep = Separation((4,), ())
        assert verify_separation(i1, sep) is None
        assert verify_separation(i0, denormalize_separation(sep, maps)) is None


class TestVerify:
    def test_single_line_ok(self):
        assert verify_separation(inst([(3, 3)], [(6, 6)]), Separation((4,), ())) is None

    def test_empty_separation_violates(self):
        bad = verify_separation(inst([(3, 3)], [(6, 6)]), Separation((), ()))
        assert bad == (Point(3, 3, 1), Point(6, 6, 2))

    def test_xor_needs_horizontal(self):
        i = inst([(3, 3), (6, 6)], [(3, 6), (6, 3)])
        bad = verify_separation(i, Separation((4,), ()))
        assert bad == (Point(3, 3, 1), Point(3, 6, 2))

    def test_monotone_in_lines(self):
        rng = random.Random(8)
        for _ in range(50):
            pts = list({(rng.randint(0, 9), rng.randint(0, 9)) for _ in range(8)})
            half = len(pts) // 2
            i = inst(pts[:half], pts[half:])
            xs = sorted(rng.sample([Fraction(k, 2) for k in range(-1, 20)], 3))
            ys = sorted(rng.sample([Fraction(k, 2) for k in range(-1, 20)], 3))
            small = Separation((xs[0],), (ys[0],))
            big = Separation(tuple(xs), tuple(ys))
            if verify_separation(i, small) is None:
                assert verify_separation(i, big) is None


class TestExtremal:
    def test_singleton(self):
        e = extremal_points([Point(3, 3, 1)])
        assert set(e.values()) == {Point(3, 3, 1)}

    def test_tie_break(self):
        pts = [Point(3, 3, 1), Point(6, 3, 1)]
        e = extremal_points(pts)
        assert e["left"] == Point(3, 3, 1)
        assert e["right"] == Point(6, 3, 1)
        assert e["top"] == Point(6, 3, 1)
        assert e["bottom"] == Point(3, 3, 1)

    def test_three_points(self):
        pts = [Point(3, 6, 1), Point(6, 3, 1), Point(9, 9, 1)]
        e = extremal_points(pts)
        assert e["top"] == Point(9, 9, 1)
        assert e["bottom"] == Point(6, 3, 1)
        assert e["left"] == Point(3, 6, 1)
        assert e["right"] == Point(9, 9, 1)

    def test_empty(self):
        with pytest.raises(EmptySet):
            extremal_points([])


class TestPlanted:
    def test_deterministic(self):
        assert generate_planted(5, 2, 1, 2) == generate_planted(5, 2, 1, 2)

    def test_zero_grid(self):
        i = generate_planted(1, 0, 0, 3)
        assert min_separation_bruteforce(i).size == 0

    def test_single_line_bound(self):
        i = generate_planted(2, 1, 0, 1)
        assert min_separation_bruteforce(i).size <= 1

    def test_grid_bound(self):
        i = generate_planted(3, 2, 1, 2)
        assert min_separation_bruteforce(i).size <= 3
