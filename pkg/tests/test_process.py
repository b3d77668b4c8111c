"""
Block processes, most-right sequences and the critical process.
"""
import dataclasses

import numpy as np
import pytest

from nilreg.config import Settings
from nilreg.errors import (
    DependencyError,
    DomainError,
    InsufficientDataError,
    PreconditionError,
    SpecInconsistencyError,
)
from nilreg.models import CriticalConstants, ProcessVariant
from nilreg.process import (
    BALL_BLOCK,
    RIGHT_BLOCK,
    Block,
    CosetOrderAction,
    IdentityAction,
    ProfileLengths,
    QuotientWalk,
    block_schedule,
    block_uniformity,
    calibrate_critical,
    critical_trace,
    endpoint_samples,
    max_point_mass,
    most_right_sequence,
    required_radius,
    sample_path,
    sample_path_right,
    summability_report,
)
from nilreg.wordmetric import ball


@pytest.fixture(scope="module")
def n3_walk(catalog):
    """Critical walk of N3 in G/Z(G) = Z^2."""
    spec = catalog.group("N3")
    quotient = catalog.group("Z2")
    return QuotientWalk.for_witness(spec, spec.witness("Zcenter_chain"), quotient, ball(quotient, 64))


class TestSchedule:
    """Block layout n_j = 2^j."""

    def test_plain(self):
        assert block_schedule(7) == [Block(0, 1, BALL_BLOCK), Block(1, 2, BALL_BLOCK), Block(3, 4, BALL_BLOCK)]

    def test_right(self):
        assert block_schedule(7, right=True) == [
            Block(0, 1, RIGHT_BLOCK), Block(1, 1, BALL_BLOCK),
            Block(2, 2, RIGHT_BLOCK), Block(4, 2, BALL_BLOCK),
            Block(6, 4, RIGHT_BLOCK),
        ]

    def test_required_radius(self):
        assert required_radius(31) == 16
        assert required_radius(32) == 32
        assert required_radius(7, right=True) == 2
        assert required_radius(0) == 0


class TestPlainProcess:
    """Uniform blocks drawn from B_{n_j}."""

    def test_deterministic(self, n3, n3_ball):
        first = sample_path(n3, n3_ball, 15, seed=11)
        second = sample_path(n3, n3_ball, 15, seed=11)
        assert first.letters == second.letters
        assert first.products == second.products

    def test_left_action(self, n3, n3_ball):
        trace = sample_path(n3, n3_ball, 15, seed=3)
        layout = n3.layout
        for n, w in enumerate(trace.letters, start=1):
            assert trace.products[n] == layout.multiply(n3_ball.letter_entries[w], trace.products[n - 1])

    def test_blocks_land_in_balls(self, n3, n3_ball):
        """Each block multiplies to the ball element it drew."""
        trace = sample_path(n3, n3_ball, 15, seed=5)
        layout = n3.layout
        for block, index in zip(trace.schedule, trace.draws):
            g = layout.multiply(trace.products[block.end], layout.inverse(trace.products[block.start]))
            assert g == n3_ball.order[index]
            assert n3_ball.store[g][0] <= block.length

    def test_ball_too_small(self, n3, n3_ball):
        with pytest.raises(DependencyError):
            sample_path(n3, n3_ball, 16, seed=0)

    def test_wrong_group(self, n4, n3_ball):
        with pytest.raises(PreconditionError):
            sample_path(n4, n3_ball, 3, seed=0)


class TestMostRight:
    """Greedy most-moving-right letters."""

    def test_identity_action_ties_to_e(self):
        letters, points = most_right_sequence(IdentityAction(5), 4)
        assert letters == [0, 0, 0, 0]
        assert points == [0.0] * 5

    def test_coset_order_is_monotone(self, n3):
        action = CosetOrderAction(n3, n3.witness("K_ac"))
        letters, points = most_right_sequence(action, 6)
        keys = [action.key(p) for p in points]
        assert all(a < b for a, b in zip(keys, keys[1:])), f"keys {keys}"
        assert letters[0] == 2, "b moves the identity coset furthest right"

    def test_needs_chain(self, n3):
        witness = n3.witness("K_ac")
        bare = dataclasses.replace(witness, stabilizer=n3.subgroup("H_a"))
        with pytest.raises(PreconditionError):
            CosetOrderAction(n3, bare)


class TestRightProcess:
    """x0 never moves left under the right process."""

    def test_points_stay_right(self, n3):
        record = ball(n3, 8)
        action = CosetOrderAction(n3, n3.witness("K_ac"))
        for seed in range(20):
            trace = sample_path_right(n3, record, action, 20, seed)
            assert trace.variant is ProcessVariant.RIGHT
            assert all(key >= trace.points[0] for key in trace.points)

    @pytest.mark.montecarlo
    def test_endpoint_mass_small(self, n3, n3_ball):
        action = CosetOrderAction(n3, n3.witness("K_ac"))
        samples = endpoint_samples(n3, n3_ball, 15, range(400), at=(15,), action=action)
        assert max_point_mass(samples[15]) < 0.05


class TestCriticalProcess:
    """Walk in the abelian quotient with profile lengths."""

    def test_profile_domain(self):
        with pytest.raises(DomainError):
            ProfileLengths(alpha=1.5)
        with pytest.raises(DomainError):
            ProfileLengths(c0=0.0)

    def test_profile_decreases(self):
        lengths = ProfileLengths()
        assert lengths(0) > lengths(1) > lengths(10)

    def test_trace_lengths(self, n3_walk):
        trace = n3_walk.trace(16, seed=1)
        assert trace.variant is ProcessVariant.CRITICAL
        assert trace.norms[0] == 0
        assert trace.lengths == [n3_walk.lengths(v) for v in trace.norms]
        assert n3_walk.degree == 2

    def test_quotient_mismatch(self, catalog, n3_walk):
        spec = catalog.group("N3")
        z3 = catalog.group("Z3")
        with pytest.raises(PreconditionError):
            QuotientWalk.for_witness(spec, spec.witness("Zcenter_chain"), z3, ball(z3, 2))

    def test_letters_must_project_to_a_basis(self, catalog):
        """c dies in G/Z(G), so {a, c} cannot walk like the letters of Z^2."""
        spec = dataclasses.replace(catalog.group("N3"), fset=("a", "c"))
        quotient = catalog.group("Z2")
        with pytest.raises(SpecInconsistencyError):
            QuotientWalk.for_witness(spec, spec.witness("Zcenter_chain"), quotient, ball(quotient, 2))

    def test_quotient_letters_must_be_a_basis(self, catalog):
        spec = catalog.group("N3")
        quotient = dataclasses.replace(catalog.group("Z2"), fset=("x1", "x1"))
        with pytest.raises(SpecInconsistencyError) as exc:
            QuotientWalk.for_witness(spec, spec.witness("Zcenter_chain"), quotient, ball(quotient, 2))
        assert "Z2" in exc.value.message

    def test_power_of_two_required(self, n3_walk):
        constants = CriticalConstants(c1=1.0, c2=1.0, d=2, calibration_steps=8, calibration_seeds=1)
        with pytest.raises(PreconditionError):
            critical_trace(n3_walk, 24, constants)

    def test_degree_mismatch(self, n3_walk):
        constants = CriticalConstants(c1=1.0, c2=1.0, d=3, calibration_steps=8, calibration_seeds=1)
        with pytest.raises(PreconditionError):
            critical_trace(n3_walk, 16, constants)

    def test_calibration(self, n3_walk):
        constants = calibrate_critical(n3_walk, steps=16, seeds=range(8))
        assert constants.c1 > 0 and constants.c2 > 0
        assert constants.calibrated
        assert constants.calibration_seeds == 8

    def test_calibration_needs_seeds(self, n3_walk):
        with pytest.raises(InsufficientDataError):
            calibrate_critical(n3_walk, steps=16, seeds=[])

    @pytest.mark.montecarlo
    def test_bounds_hold_after_retries(self, n3_walk):
        constants = calibrate_critical(n3_walk)
        trace, stats = critical_trace(n3_walk, 64, constants, retries=Settings().critical_retries)
        assert stats.root_sum <= stats.root_sum_bound
        assert stats.final_length <= stats.final_bound
        assert trace.steps == 64


class TestSummability:
    """S_N = sum l(v_n)^alpha."""

    def test_partial_sums_increase(self, n3_walk):
        traces = [n3_walk.trace(64, seed) for seed in range(4)]
        report = summability_report(traces, alpha=0.9, window=(8, 63))
        for row in report.partial_sums:
            assert all(a < b for a, b in zip(row, row[1:]))
        assert report.decay_slope is not None and report.decay_slope < 0

    def test_window_too_long(self, n3_walk):
        report = summability_report([n3_walk.trace(16, 0)], alpha=0.5)
        assert report.window is None and report.decay_slope is None

    def test_alpha_domain(self, n3_walk):
        with pytest.raises(DomainError):
            summability_report([n3_walk.trace(4, 0)], alpha=0.0)

    def test_needs_lengths(self, n3, n3_ball):
        with pytest.raises(PreconditionError):
            summability_report([sample_path(n3, n3_ball, 4, 0)], alpha=0.5)


class TestStatistics:
    """Point masses and block uniformity."""

    def test_max_point_mass(self):
        assert max_point_mass([1, 1, 2, 3]) == 0.5

    def test_empty_samples(self):
        with pytest.raises(InsufficientDataError):
            max_point_mass([])

    def test_uniform_indices_pass(self):
        rng = np.random.default_rng(0)
        _, _, passed = block_uniformity(rng.integers(0, 10, size=5000), 10)
        assert passed

    def test_skewed_indices_fail(self):
        indices = [0] * 900 + list(range(10)) * 10
        _, pvalue, passed = block_uniformity(indices, 10)
        assert not passed and pvalue < 1e-3

    def test_draws_are_uniform(self, n3, n3_ball):
        """First-block draws of the plain process cover B_1 uniformly."""
        draws = [sample_path(n3, n3_ball, 1, seed).draws[0] for seed in range(1000)]
        _, _, passed = block_uniformity(draws, n3_ball.counts[1])
        assert passed
