"""
Stabilizer witnesses and critical regularity values.
"""
import dataclasses
from fractions import Fraction

import pytest

from nilreg.critreg import (
    UNBOUNDED,
    abelian_stab_bound,
    crit_for_element,
    crit_interval,
    element_crit,
    topologically_free_bound,
    verify_catalog_witnesses,
    verify_witness,
)
from nilreg.errors import EmptyWitnessSetError, PreconditionError, WitnessVerificationError
from nilreg.group_core import LinearFunctional


class TestWitnesses:
    """Clause-by-clause verification."""

    def test_all_catalog_witnesses_verify(self, catalog):
        for name in catalog.names():
            reports = verify_catalog_witnesses(catalog.group(name))
            assert all(report.passed for report in reports), f"{name} has a failing witness"

    def test_report_lists_chain_clauses(self, n3):
        report = verify_witness(n3, n3.witness("Zcenter_chain"))
        names = [check.name for check in report.checks]
        assert "chain-1-normal" in names
        assert names[-1] == "chain-end"

    def test_mu_vanishing_on_centre(self, n3):
        """mu reading a12 vanishes on c."""
        bad = dataclasses.replace(n3.witness("K_ac"), mu=LinearFunctional(((1, 1, 2, 1),)))
        with pytest.raises(WitnessVerificationError) as exc:
            verify_witness(n3, bad)
        assert exc.value.context["clause"] == "mu-central"

    def test_non_strict_returns_report(self, n3):
        bad = dataclasses.replace(n3.witness("K_ac"), central=n3.element("a"), central_name="a")
        report = verify_witness(n3, bad, strict=False)
        assert not report.passed
        assert report.failures()[0].name == "central"

    def test_kernel_must_lie_in_stabilizer(self, n3):
        bad = dataclasses.replace(n3.witness("K_ac"), kernel=n3.subgroup("whole"))
        report = verify_witness(n3, bad, strict=False)
        assert "mu-kernel" in [check.name for check in report.failures()]


@pytest.mark.parametrize("name, value", [
    ("N3", "2"),
    ("N4", "3/2"),
    ("H5", "3/2"),
    ("N3xN3", "2"),
    ("Z2", UNBOUNDED),
])
def test_crit_values(catalog, name, value):
    result = crit_interval(catalog.group(name))
    assert result.value == value, f"{name}: got {result.value}"
    assert set(result.interval_values.values()) == {value}


class TestCrit:
    """Per-element minima and the overall maximum."""

    def test_heisenberg_minimum_is_k_ac(self, n3):
        result = crit_interval(n3)
        (entry,) = result.per_element
        assert entry.min_degree == 1
        assert entry.attained_by == "K_ac"
        assert entry.witnesses_considered == ["K_ac", "Zcenter_chain"]
        assert result.cyclic_center

    def test_product_group_per_element(self, catalog):
        spec = catalog.group("N3xN3")
        result = crit_interval(spec)
        assert [item.value for item in result.per_element] == ["2", "2", "2"]
        assert not result.cyclic_center
        assert result.as_fraction() == Fraction(2)

    def test_element_crit_needs_witnesses(self, n3):
        with pytest.raises(EmptyWitnessSetError):
            element_crit(n3, "c", [])

    def test_witness_for_other_element(self, catalog):
        spec = catalog.group("N3xN3")
        with pytest.raises(PreconditionError):
            element_crit(spec, "c1", [spec.witness("K2_ac")])

    def test_crit_for_element_fraction(self, n4):
        assert crit_for_element(n4, "c", [n4.witness("K_ex74")]) == Fraction(3, 2)

    def test_centre_witness_alone_is_worse(self, n3):
        """K = Z(G) gives 1 + 1/2, the minimum over witnesses is lower."""
        assert crit_for_element(n3, "c", [n3.witness("Zcenter_chain")]) == Fraction(3, 2)


class TestTopologicallyFree:
    """Upper bound from abelian subgroups containing the centre."""

    def test_n3xn3(self, catalog):
        assert topologically_free_bound(catalog.group("N3xN3")) == Fraction(3, 2)

    def test_join_with_centre(self, catalog):
        spec = catalog.group("N3xN3")
        is_abelian, degree = abelian_stab_bound(spec, spec.subgroup("A_a1"))
        assert is_abelian
        assert degree == 3

    def test_heisenberg(self, n3):
        assert topologically_free_bound(n3) == Fraction(2)
