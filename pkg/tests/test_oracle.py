import itertools
import random

import pytest

from optdisc.forest_csp import ForestCspInstance, verify_assignment
from optdisc.geometry import Instance, Separation, normalize, verify_separation
from optdisc.oracle import (
    TooLarge,
    candidate_lines,
    forest_csp_enumerate,
    min_separation_bruteforce,
)

from conftest import random_forest_instance


def inst(w1, w2):
    return Instance.from_points(w1, w2)


def all_mod3_positions_minimum(instance):
    """Secondary oracle for normalized instances: try every subset of the
    positions that are 2 mod 3 inside the grid."""
    pts = instance.points()
    hi = 3 * instance.n + 1
    xs = [v for v in range(2, hi, 3)]
    ys = [v for v in range(2, hi, 3)]
    pool = [("x", v) for v in xs] + [("y", v) for v in ys]
    for size in range(len(pool) + 1):
        for combo in itertools.combinations(pool, size):
            sep = Separation(
                tuple(v for a, v in combo if a == "x"),
                tuple(v for a, v in combo if a == "y"),
            )
            if verify_separation(instance, sep) is None:
                return sep
    raise AssertionError("unreachable: the full grid always separates")


class TestBruteForce:
    def test_single_pair(self):
        s = min_separation_bruteforce(inst([(3, 3)], [(6, 6)]))
        assert s.size == 1

    def test_xor(self):
        s = min_separation_bruteforce(inst([(3, 3), (6, 6)], [(3, 6), (6, 3)]))
        assert s.size == 2

    def test_empty_class(self):
        s = min_separation_bruteforce(inst([(3, 3), (6, 6)], []))
        assert s.size == 0

    def test_bound(self):
        assert min_separation_bruteforce(
            inst([(3, 3), (6, 6)], [(3, 6), (6, 3)]), upper_bound=1) is None

    def test_output_verifies_and_is_minimal(self):
        rng = random.Random(12)
        for _ in range(20):
            pts = list({(rng.randint(0, 7), rng.randint(0, 7)) for _ in range(7)})
            half = len(pts) // 2
            i = inst(pts[:half], pts[half:])
            s = min_separation_bruteforce(i)
            assert verify_separation(i, s) is None
            if s.size > 0:
                assert min_separation_bruteforce(i, upper_bound=s.size - 1) is None

    def test_matches_mod3_oracle_on_normalized(self):
        rng = random.Random(14)
        for _ in range(15):
            pts = list({(rng.randint(0, 6), rng.randint(0, 6)) for _ in range(6)})
            half = len(pts) // 2
            i, _ = normalize(inst(pts[:half], pts[half:]))
            assert min_separation_bruteforce(i).size == all_mod3_positions_minimum(i).size

    def test_candidate_lines_cover_gaps(self):
        i = inst([(0, 0), (4, 0)], [(2, 2)])
        c = candidate_lines(i)
        assert c.xs == (-1, 1, 3, 5)
        assert c.ys == (-1, 1, 3)


class TestForestEnumerate:
    def test_empty_instance(self):
        assert forest_csp_enumerate(ForestCspInstance((), (), ())) == [{}]

    def test_everything_excluded(self):
        from optdisc.segrev import DownwardClosedRelation

        rel = DownwardClosedRelation(2, 2, (0, 0))
        out = forest_csp_enumerate(ForestCspInstance((2, 2), (), ((0, 1, rel),)))
        assert out == []

    def test_equals_definitional_filter(self):
        rng = random.Random(16)
        for _ in range(100):
            fi = random_forest_instance(rng, max_trees=3, max_nodes=5, max_dom=4)
            got = forest_csp_enumerate(fi)
            comps = fi.trees()
            from optdisc.forest_csp import propagate

            brute = []
            anchors = [c[0] for c in comps]
            ranges = [range(1, fi.dom[a] + 1) for a in anchors]
            for choice in itertools.product(*ranges):
                asg = {}
                for comp, val in zip(comps, choice):
                    for y in comp:
                        asg[y] = propagate(fi, comp[0], val, y)
                if verify_assignment(fi, asg) is None:
                    brute.append(asg)
            assert got == brute

    def test_cap(self):
        with pytest.raises(TooLarge):
            forest_csp_enumerate(ForestCspInstance((100, 100, 100), (), ()), cap=1000)
