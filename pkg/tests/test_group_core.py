"""
Exact group arithmetic, coset coordinates and catalog self-checks.
"""
import copy
import json

import numpy as np
import pytest
from hypothesis import given, settings as hyp_settings, strategies as st

from nilreg.catalog import load_catalog
from nilreg.errors import CatalogLookupError, PreconditionError, SpecValidationError, StructuralError
from nilreg.group_core import (
    _level_samples,
    canonicalize_coset,
    commutator,
    coset_canonicalizer,
    is_member,
    lattice_rank,
    power,
    project,
    verify_spec,
)


def _word(spec, indices):
    letters = spec.letters()
    g = spec.identity()
    for idx in indices:
        g = g * letters[idx].element
    return g


class TestArithmetic:
    """Multiplication, inverses and commutators on integer matrices."""

    def test_product_matches_matrix_product(self, n3):
        """a * b agrees with the numpy product of the matrices."""
        a, b = n3.element("a"), n3.element("b")
        expected = np.array(a.matrices()[0]) @ np.array(b.matrices()[0])
        assert np.array_equal(np.array((a * b).matrices()[0]), expected), \
            f"a*b = {(a * b).matrices()} differs from numpy {expected.tolist()}"

    def test_inverse_gives_identity(self, n4):
        g = n4.parse_word("a b d^-1 a^2 b")
        assert (g * g.inverse()).is_identity
        assert (g.inverse() * g).is_identity

    def test_heisenberg_commutator_is_c(self, n3):
        """[a, b] = a b a^-1 b^-1 is the central generator."""
        assert commutator(n3.element("a"), n3.element("b")) == n3.element("c")

    def test_b_a_canonical_relation(self, n3):
        """b a = a b c^-1 in N3."""
        assert n3.parse_word("b a") == n3.parse_word("a b c^-1")

    def test_power(self, n3):
        a = n3.element("a")
        assert power(a, 0).is_identity
        assert power(a, -3) == a.inverse() * a.inverse() * a.inverse()
        assert power(a, 5).entry(1, 1, 2) == 5

    def test_layout_mismatch_raises(self, n3, n4):
        with pytest.raises(StructuralError):
            n3.element("a") * n4.element("a")

    def test_unknown_token_raises(self, n3):
        with pytest.raises(CatalogLookupError) as exc:
            n3.parse_word("a q")
        assert "a" in exc.value.context["available"]

    @hyp_settings(max_examples=40, deadline=None)
    @given(
        st.lists(st.integers(0, 6), max_size=6),
        st.lists(st.integers(0, 6), max_size=6),
        st.lists(st.integers(0, 6), max_size=6),
    )
    def test_associativity(self, n4, x, y, z):
        """(xy)z = x(yz) for random words over the N4 metric letters."""
        gx, gy, gz = _word(n4, x), _word(n4, y), _word(n4, z)
        assert (gx * gy) * gz == gx * (gy * gz)


class TestLattice:
    """Integer lattice ranks."""

    def test_rank_of_dependent_vectors(self):
        assert lattice_rank([[2, 0], [0, 3], [2, 3]]) == 2

    def test_rank_of_empty_set(self):
        assert lattice_rank([]) == 0

    def test_rank_ignores_zero_rows(self):
        assert lattice_rank([[0, 0, 0], [1, 2, 3], [0, 0, 0]]) == 1

    def test_ragged_vectors_raise(self):
        with pytest.raises(StructuralError):
            lattice_rank([[1, 0], [1]])


class TestProjections:
    """Level projections phi_j."""

    def test_level_one_reads_abelianization(self, n3):
        assert project(n3, 1, n3.parse_word("a^2 b^-3 c^7")) == (2, -3)

    def test_level_two_of_central_power(self, n3):
        assert project(n3, 2, n3.parse_word("c^-4")) == (-4,)

    def test_element_outside_level_raises(self, n3):
        with pytest.raises(PreconditionError):
            project(n3, 2, n3.element("a"))


class TestCosets:
    """Coset coordinates along subgroup chains."""

    def test_k_ac_coordinate_is_b_exponent(self, n3):
        sub = n3.subgroup("K_ac")
        g = n3.parse_word("b^3 a^2")
        assert canonicalize_coset(n3, sub, g) == (3,)

    def test_right_multiplication_by_k_keeps_coset(self, n3):
        sub = n3.subgroup("K_ac")
        g = n3.parse_word("b^3 a^-1 b")
        h = n3.parse_word("a^5 c^-2")
        assert is_member(sub, h)
        assert canonicalize_coset(n3, sub, g * h) == canonicalize_coset(n3, sub, g)

    def test_centre_coordinates(self, n3):
        """G/Z(G) = Z^2 reads (a23, a12)."""
        sub = n3.subgroup("Zcenter")
        assert canonicalize_coset(n3, sub, n3.parse_word("a^2 b^-1 c^9")) == (-1, 2)

    def test_fast_canonicalizer_agrees(self, n3, n3_ball):
        sub = n3.subgroup("Zcenter")
        canonical = coset_canonicalizer(n3, sub, with_residual=True)
        for i, key in enumerate(n3_ball.order[:200]):
            g = n3_ball.element_at(i)
            coords, residual = canonical(key)
            assert coords == canonicalize_coset(n3, sub, g)
            assert sub.predicate.compile(n3.layout)(residual), f"residual of {g} is not central"

    def test_no_chain_returns_none(self, n3):
        assert coset_canonicalizer(n3, n3.subgroup("H_a")) is None
        with pytest.raises(PreconditionError):
            canonicalize_coset(n3, n3.subgroup("H_a"), n3.element("a"))


class TestVerifySpec:
    """Catalog entries pass their own structural checks."""

    def test_every_catalog_group_verifies(self, catalog):
        for name in catalog.names():
            report = verify_spec(catalog.group(name), strict=False)
            assert report.passed, f"{name} fails {[c.name for c in report.failures()]}"

    def test_samples_reach_word_length_four(self, n3):
        found = {element: word for word, element in _level_samples(n3, 1)}
        square = n3.parse_word("a^2 b^2")
        assert square in found, "a^2 b^2 needs four letters"
        assert len(found[square].split()) == 4
        assert n3.parse_word("a^3 b^2") not in found
        assert max(len(word.split()) for word in found.values()) == 4


def _corrupted_n3(tmp_path, raw_catalog, edit):
    payload = copy.deepcopy(raw_catalog)
    entry = next(g for g in payload["groups"] if g["name"] == "N3")
    edit(entry)
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return load_catalog(path).group("N3")


def _set_level_two(**fields):
    def edit(entry):
        entry["levels"][1].update(fields)
    return edit


class TestVerifySpecFailures:
    """Corrupted lower central series data is caught by name."""

    def test_wrong_projection_fails_graded_basis(self, tmp_path, raw_catalog):
        spec = _corrupted_n3(tmp_path, raw_catalog, _set_level_two(projection=[[[1, 1, 2, 1]]]))
        report = verify_spec(spec, strict=False)
        failed = [c.name for c in report.failures()]
        assert "graded-basis" in failed, f"failures: {failed}"
        assert "nestedness" not in failed

    def test_missing_constraint_fails_nestedness(self, tmp_path, raw_catalog):
        spec = _corrupted_n3(tmp_path, raw_catalog, _set_level_two(vanish=[[1, 1, 2]]))
        report = verify_spec(spec, strict=False)
        nestedness = next(c for c in report.checks if c.name == "nestedness")
        assert not nestedness.passed
        assert "generator b of level 1" in nestedness.detail

    def test_strict_mode_raises(self, tmp_path, raw_catalog):
        spec = _corrupted_n3(tmp_path, raw_catalog, _set_level_two(vanish=[[1, 1, 2]]))
        with pytest.raises(SpecValidationError) as exc:
            verify_spec(spec)
        assert exc.value.error_code == "SPEC_VALIDATION_FAILED"
        assert not exc.value.report.passed
        assert "nestedness" in exc.value.message
