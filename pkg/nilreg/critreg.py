"""
Stabilizer witnesses and critical regularity values.

All checks are exact and run on generators and generator pairs; the catalog
functionals are linear in matrix entries on the subgroups they are declared on.
"""
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple, Union

from nilreg.errors import (
    CatalogInconsistencyError,
    EmptyWitnessSetError,
    PreconditionError,
    WitnessVerificationError,
)
from nilreg.growth import schreier_degree
from nilreg.models import CheckResult, CritResult, ElementCrit, VerificationReport, fmt_fraction

if TYPE_CHECKING:
    from nilreg.group_core import ChainStep, GroupElement, GroupSpec, LinearFunctional, SubgroupSpec

logger = logging.getLogger(__name__)

UNBOUNDED = "UNBOUNDED"

CritValue = Union[Fraction, str]


@dataclass(frozen=True)
class StabilizerWitness:
    name: str
    central_name: str
    central: "GroupElement"
    stabilizer: "SubgroupSpec"
    kernel: "SubgroupSpec"
    mu: "LinearFunctional"
    chain: Tuple["ChainStep", ...] = ()
    abelian_quotient: Optional[str] = None
    rationale: str = ""


def _with_inverses(elements: Sequence["GroupElement"]) -> List["GroupElement"]:
    return list(elements) + [g.inverse() for g in elements]


def _gcd_one(values: Sequence[int]) -> bool:
    total = 0
    for value in values:
        total = gcd(total, value)
    return total == 1


def _homomorphism_failures(functional: "LinearFunctional", elements: Sequence["GroupElement"]) -> List[str]:
    problems = []
    for x, y in itertools.product(_with_inverses(elements), repeat=2):
        if functional.evaluate(x * y) != functional.evaluate(x) + functional.evaluate(y):
            problems.append(f"{functional.describe()} not additive on {x} * {y}")
            break
    return problems


def _check(report: VerificationReport, name: str, problems: List[str]) -> None:
    report.checks.append(CheckResult(name=name, passed=not problems, detail="; ".join(problems)))


def verify_witness(spec: "GroupSpec", w: StabilizerWitness, strict: bool = True) -> VerificationReport:
    """
    Check a witness clause by clause.

    Clauses: central (c is central and lies in K), mu-central (mu(c) != 0 and c not in H),
    mu-kernel, mu-surjective, mu-homomorphism, then per chain step inclusion, transversal,
    vanish, surjective, normal and homomorphism, and chain-end.
    """
    report = VerificationReport(subject=f"{spec.name}/{w.name}")
    K, H, c = w.stabilizer, w.kernel, w.central
    all_generators = [gen.element for gen in spec.generators.values()]

    problems = []
    if not all(c.commutator(g).is_identity for g in all_generators):
        problems.append(f"{w.central_name} is not central")
    if not K.predicate.holds(c):
        problems.append(f"{w.central_name} is not in {K.name}")
    _check(report, "central", problems)

    problems = []
    if w.mu.evaluate(c) == 0:
        problems.append(f"mu({w.central_name}) = 0")
    if H.predicate.holds(c):
        problems.append(f"{w.central_name} lies in {H.name}")
    _check(report, "mu-central", problems)

    problems = []
    for word, h in zip(H.generator_words, H.generators):
        if not K.predicate.holds(h):
            problems.append(f"{H.name} generator {word} is not in {K.name}")
        if w.mu.evaluate(h) != 0:
            problems.append(f"mu({word}) != 0 on {H.name}")
    _check(report, "mu-kernel", problems)

    values = [w.mu.evaluate(k) for k in K.generators]
    _check(report, "mu-surjective", [] if _gcd_one(values) else [f"gcd of mu over {K.name} generators is not 1"])
    _check(report, "mu-homomorphism", _homomorphism_failures(w.mu, K.generators))

    outer_name, outer_predicate, outer_generators = "G", None, all_generators
    for i, step in enumerate(w.chain):
        inner = spec.subgroup(step.subgroup)
        prefix = f"chain-{i}"

        problems = [f"{inner.name} generator {word} is not in {outer_name}"
                    for word, k in zip(inner.generator_words, inner.generators)
                    if outer_predicate is not None and not outer_predicate.holds(k)]
        _check(report, f"{prefix}-inclusion", problems)

        problems = []
        if step.functional.evaluate(step.transversal) != 1:
            problems.append(f"lambda_{i}({step.transversal_name}) != 1")
        if outer_predicate is not None and not outer_predicate.holds(step.transversal):
            problems.append(f"transversal {step.transversal_name} is not in {outer_name}")
        _check(report, f"{prefix}-transversal", problems)

        problems = [f"lambda_{i}({word}) != 0" for word, k in zip(inner.generator_words, inner.generators)
                    if step.functional.evaluate(k) != 0]
        _check(report, f"{prefix}-vanish", problems)

        values = [step.functional.evaluate(k) for k in outer_generators]
        _check(report, f"{prefix}-surjective",
               [] if _gcd_one(values) else [f"gcd of lambda_{i} over {outer_name} generators is not 1"])

        problems = []
        for x, y in itertools.product(_with_inverses(outer_generators), inner.generators):
            if not inner.predicate.holds(x * y * x.inverse()):
                problems.append(f"{inner.name} is not normalized by {x}")
                break
        _check(report, f"{prefix}-normal", problems)
        _check(report, f"{prefix}-homomorphism", _homomorphism_failures(step.functional, outer_generators))

        outer_name, outer_predicate, outer_generators = inner.name, inner.predicate, list(inner.generators)

    if w.chain:
        end = [] if w.chain[-1].subgroup == K.name else [f"chain ends at {w.chain[-1].subgroup}, not {K.name}"]
    else:
        end = [f"empty chain but {K.name} is not G"] if not all(K.predicate.holds(g) for g in all_generators) else []
    _check(report, "chain-end", end)

    failures = report.failures()
    for check in failures:
        logger.info("%s: clause %s failed: %s", report.subject, check.name, check.detail)
    if strict and failures:
        raise WitnessVerificationError(
            f"witness {w.name} fails clause {failures[0].name}: {failures[0].detail}",
            clause=failures[0].name,
            report=report,
        )
    return report


def element_crit(spec: "GroupSpec", central: str, witnesses: Sequence[StabilizerWitness]) -> ElementCrit:
    """1 + 1/min gr(G/K) over verified witnesses for one central element, with provenance."""
    if not witnesses:
        raise EmptyWitnessSetError(f"{spec.name}: no witness supplied for {central}", central=central)
    best_degree, best_name = None, None
    for w in witnesses:
        if w.central_name != central:
            raise PreconditionError(f"witness {w.name} is for {w.central_name}, not {central}", witness=w.name)
        verify_witness(spec, w)
        degree = schreier_degree(spec, w.stabilizer)
        if best_degree is None or degree < best_degree:
            best_degree, best_name = degree, w.name
    value = UNBOUNDED if best_degree == 0 else fmt_fraction(1 + Fraction(1, best_degree))
    return ElementCrit(
        central=central,
        min_degree=best_degree,
        value=value,
        attained_by=best_name,
        witnesses_considered=[w.name for w in witnesses],
    )


def crit_for_element(spec: "GroupSpec", central: str, witnesses: Sequence[StabilizerWitness]) -> CritValue:
    result = element_crit(spec, central, witnesses)
    return UNBOUNDED if result.value == UNBOUNDED else Fraction(result.value)


def crit_interval(spec: "GroupSpec") -> CritResult:
    """
    1 + 1/(max over declared c of min gr(G/K)); the same value holds on [0,1], (0,1] and S1.
    """
    if not spec.central_candidates:
        raise EmptyWitnessSetError(f"{spec.name} declares no central candidates")
    per_element = []
    for candidate in spec.central_candidates:
        witnesses = [spec.witness(name) for name in candidate.witnesses]
        per_element.append(element_crit(spec, candidate.element_name, witnesses))

    unbounded = [item.central for item in per_element if item.value == UNBOUNDED]
    if unbounded and not spec.abelian:
        raise CatalogInconsistencyError(
            f"{spec.name} is declared non-abelian but {unbounded} give an unbounded value", group=spec.name
        )
    if spec.abelian:
        value = UNBOUNDED
    else:
        worst = max(item.min_degree for item in per_element)
        value = fmt_fraction(1 + Fraction(1, worst))
    return CritResult(
        group=spec.name,
        value=value,
        per_element=per_element,
        interval_values={"[0,1]": value, "(0,1]": value, "S1": value},
        cyclic_center=spec.center_rank == 1,
    )


def abelian_stab_bound(spec: "GroupSpec", sub: "SubgroupSpec") -> Tuple[bool, int]:
    """(H is abelian, gr(G / H∨Z(G))) with the join taken from the catalog."""
    is_abelian = all(x.commutator(y).is_identity for x, y in itertools.combinations(sub.generators, 2))
    join = spec.subgroup(sub.center_join) if sub.center_join else sub
    return is_abelian, schreier_degree(spec, join)


def topologically_free_bound(spec: "GroupSpec") -> Fraction:
    """1 + 1/min degree over the catalog's abelian subgroups containing the centre."""
    degrees = []
    for name in spec.abelian_candidates:
        sub = spec.subgroup(name)
        join = spec.subgroup(sub.center_join) if sub.center_join else sub
        missing = [c.element_name for c in spec.central_candidates if not join.predicate.holds(c.element)]
        if missing:
            raise PreconditionError(f"{name} does not contain central elements {missing}", subgroup=name)
        is_abelian, degree = abelian_stab_bound(spec, sub)
        if not is_abelian:
            raise CatalogInconsistencyError(f"abelian candidate {name} of {spec.name} is not abelian")
        if degree > 0:
            degrees.append(degree)
    if not degrees:
        raise EmptyWitnessSetError(f"{spec.name} declares no abelian candidates of positive degree")
    return 1 + Fraction(1, min(degrees))


def verify_catalog_witnesses(spec: "GroupSpec") -> List[VerificationReport]:
    return [verify_witness(spec, w) for w in spec.witnesses.values()]
