"""
Word-metric balls, Schreier balls and the sandwich inequalities.
"""
import pytest

from nilreg.config import Settings
from nilreg.errors import BallBudgetExceeded, CosetBudgetExceeded, NotInBallError, PreconditionError
from nilreg.wordmetric import (
    BallCache,
    ball,
    geodesic_word,
    inclusion_profile,
    relative_count,
    sandwich_violations,
    schreier_ball,
    subball_counts,
    word_product,
)


class TestAbelianBalls:
    """Closed-form ball sizes in Z^d."""

    def test_z1(self, catalog):
        record = ball(catalog.group("Z1"), 5)
        assert record.counts == [2 * n + 1 for n in range(6)]

    def test_z2(self, catalog):
        record = ball(catalog.group("Z2"), 6)
        assert record.counts == [2 * n * n + 2 * n + 1 for n in range(7)]

    def test_negative_radius(self, catalog):
        with pytest.raises(PreconditionError):
            ball(catalog.group("Z1"), -1)


class TestHeisenbergBall:
    """B_n of N3 with the standard generators."""

    def test_small_spheres(self, n3_ball):
        """Spheres of size 1, 4, 12."""
        assert n3_ball.counts[:3] == [1, 5, 17], f"got {n3_ball.counts[:3]}"

    def test_counts_increase(self, n3_ball):
        assert all(a < b for a, b in zip(n3_ball.counts, n3_ball.counts[1:]))

    def test_geodesic_words(self, n3_ball):
        """Every element of B_6 has a geodesic word of length |g| multiplying to g."""
        for i in range(subball_counts(n3_ball, 6)):
            g = n3_ball.element_at(i)
            word = geodesic_word(n3_ball, g)
            assert len(word) == n3_ball.distance(g)
            assert word_product(n3_ball, word) == g

    def test_subball_prefix(self, n3_ball):
        for r in range(n3_ball.radius + 1):
            size = subball_counts(n3_ball, r)
            assert all(n3_ball.store[key][0] <= r for key in n3_ball.order[:size])

    def test_centre_distance(self, n3, n3_ball):
        """|c| = 4 and |c^2| = 6."""
        assert n3_ball.distance(n3.element("c")) == 4
        assert n3_ball.distance(n3.parse_word("c^2")) == 6

    def test_outside_ball(self, n3, n3_ball):
        with pytest.raises(NotInBallError):
            n3_ball.distance(n3.parse_word("a^9"))

    def test_truncated(self, n3_ball):
        small = n3_ball.truncated(3)
        assert small.counts == n3_ball.counts[:4]
        assert len(small.store) == n3_ball.counts[3]
        with pytest.raises(PreconditionError):
            small.truncated(4)


@pytest.fixture(scope="module")
def n3_serial_ball(n3):
    """B_12 of N3 built in-process; its outer spheres exceed the parallel threshold."""
    return ball(n3, 12, Settings(workers=1))


class TestDeterminism:
    """Parallel layer expansion reproduces the serial enumeration exactly."""

    def test_frontier_reaches_parallel_branch(self, n3_serial_ball):
        counts = n3_serial_ball.counts
        assert counts[-2] - counts[-3] > 1024, f"sphere sizes {counts}"

    @pytest.mark.parametrize("workers", [2, 8])
    def test_same_ball_for_any_worker_count(self, n3, n3_serial_ball, workers):
        record = ball(n3, 12, Settings(workers=workers))
        assert record.counts == n3_serial_ball.counts
        assert record.order == n3_serial_ball.order, f"insertion order differs with {workers} workers"
        assert record.store == n3_serial_ball.store

    @pytest.mark.parametrize("workers", [2, 8])
    def test_same_geodesic_words(self, n3, n3_serial_ball, workers):
        record = ball(n3, 12, Settings(workers=workers))
        for i in range(0, len(record.order), 97):
            g = n3_serial_ball.element_at(i)
            assert geodesic_word(record, g) == geodesic_word(n3_serial_ball, g)


class TestRelativeCounts:
    """#(B_n ∩ H)."""

    def test_centre(self, n3, n3_ball):
        counts = relative_count(n3_ball, n3.subgroup("Zcenter"))
        assert counts[:5] == [1, 1, 1, 1, 3], f"got {counts[:5]}"

    def test_whole_group(self, n3, n3_ball):
        assert relative_count(n3_ball, n3.subgroup("whole")) == n3_ball.counts

    def test_inclusion_profile_reaches_multiples(self, n3, n3_ball):
        """c^k lies in B_n for |k| up to roughly n^2 / 16."""
        profile = inclusion_profile(n3, n3_ball, n3.subgroup("Zcenter"), 2)
        n, max_abs, m = profile[-1]
        assert n == 8
        assert m >= 2
        assert max_abs >= m


class TestSchreierBalls:
    """BFS over cosets gK."""

    def test_k_ac_is_a_line(self, n3_schreier):
        assert n3_schreier.counts == [2 * r + 1 for r in range(7)]

    def test_k_ac_keys(self, n3_schreier):
        assert sorted(n3_schreier.keys) == [(k,) for k in range(-6, 7)]

    def test_centre_quotient_is_z2(self, n3):
        result = schreier_ball(n3, n3.subgroup("Zcenter"), 5)
        assert result.counts == [2 * n * n + 2 * n + 1 for n in range(6)]

    def test_pairwise_oracle_agrees(self, n3):
        sub = n3.subgroup("Zcenter")
        fast = schreier_ball(n3, sub, 4)
        slow = schreier_ball(n3, sub, 4, use_canonicalizer=False)
        assert fast.counts == slow.counts

    def test_locate(self, n3, n3_schreier):
        g = n3.parse_word("b^2 a^3 c")
        v = n3_schreier.locate(g.entries)
        assert n3_schreier.keys[v] == (2,)

    def test_coset_budget(self, n3):
        with pytest.raises(CosetBudgetExceeded):
            schreier_ball(n3, n3.subgroup("Zcenter"), 6, Settings(coset_budget=3), use_canonicalizer=False)


class TestSandwich:
    """#B_2n >= #S_n #(B_n ∩ K) and #B_n <= #S_n #(B_2n ∩ K)."""

    def test_k_ac_sandwich(self, n3, n3_ball, n3_schreier):
        relative = relative_count(n3_ball, n3.subgroup("K_ac"))
        assert sandwich_violations(n3_ball.counts, n3_schreier.counts, relative, 4) == []

    def test_detects_violation(self):
        problems = sandwich_violations([1, 2, 3], [1, 5], [1, 1, 1], 1)
        assert problems, "an impossible Schreier count must be reported"


class TestBudgets:
    """Enumeration budgets keep the completed prefix."""

    def test_ball_budget(self, n3):
        with pytest.raises(BallBudgetExceeded) as exc:
            ball(n3, 10, Settings(max_elements=100))
        partial = exc.value.partial
        assert exc.value.completed_radius == partial.radius
        assert partial.counts[-1] <= 100
        assert partial.counts == ball(n3, partial.radius).counts


class TestCache:
    """Pickled balls under cache_dir."""

    def test_save_and_load(self, n3, tmp_path):
        cache = BallCache(str(tmp_path))
        first = ball(n3, 4, cache=cache)
        assert cache.path(n3, 4).is_file()
        loaded = cache.load(n3, 4)
        assert loaded.counts == first.counts
        assert loaded.order == first.order

    def test_miss(self, n3, tmp_path):
        assert BallCache(str(tmp_path)).load(n3, 3) is None
