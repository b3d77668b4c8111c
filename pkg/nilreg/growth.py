"""
Growth degrees and exponent fitting.

Degrees come from lattice ranks of the level projections and are exact. The
fitted exponents only confirm them.
"""
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from nilreg.errors import (
    InsufficientDataError,
    PreconditionError,
    RankValidationError,
    SpecInconsistencyError,
)
from nilreg.group_core import GroupElement, GroupSpec, SubgroupSpec, lattice_rank, project
from nilreg.models import CheckResult, CountKind, GrowthReport, VerificationReport, Verdict
from nilreg.wordmetric import BallRecord

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 0.4


def level_ranks(spec: GroupSpec) -> List[int]:
    return [level.rank for level in spec.levels]


def bass_guivarch(spec: GroupSpec) -> int:
    """D_G = sum_j j * d_j."""
    return sum(j * rank for j, rank in enumerate(level_ranks(spec), start=1))


def relative_ranks(spec: GroupSpec, sub: SubgroupSpec) -> List[int]:
    if sub.level_generators is None:
        raise PreconditionError(f"subgroup {sub.name} has no per-level generator lists", subgroup=sub.name)
    ranks = []
    for j in range(1, spec.nilpotency_class + 1):
        vectors = []
        for h in sub.level_generators.get(j, ()):
            if not spec.in_level(j, h):
                raise RankValidationError(
                    f"{sub.name}: level-{j} generator {h} is not in G_{j}", subgroup=sub.name, level=j
                )
            vectors.append(project(spec, j, h))
        ranks.append(lattice_rank(vectors))
    return ranks


def relative_degree(spec: GroupSpec, sub: SubgroupSpec) -> int:
    """D_{H;G} = sum_j j * rank(phi_j(H_j))."""
    return sum(j * rank for j, rank in enumerate(relative_ranks(spec, sub), start=1))


def schreier_degree(spec: GroupSpec, sub: SubgroupSpec) -> int:
    """Growth degree of the Schreier graph of G/K: D_G - D_{K;G}."""
    degree = bass_guivarch(spec) - relative_degree(spec, sub)
    if degree < 0:
        raise SpecInconsistencyError(
            f"{spec.name}/{sub.name}: negative Schreier degree {degree}", group=spec.name, subgroup=sub.name
        )
    return degree


def default_window(counts: Sequence[int]) -> Tuple[int, int]:
    top = len(counts) - 1
    return max(1, top // 3), top


def fit_exponent(counts: Sequence[int], window: Optional[Tuple[int, int]] = None) -> Tuple[float, float]:
    """Least-squares slope of log counts against log n on the window; returns (slope, rms residual)."""
    lo, hi = window or default_window(counts)
    if lo < 1 or hi >= len(counts) or lo > hi:
        raise InsufficientDataError(f"window {(lo, hi)} is outside 1..{len(counts) - 1}")
    n = np.arange(lo, hi + 1, dtype=float)
    if n.size < 3:
        raise InsufficientDataError(f"fit window {(lo, hi)} has fewer than 3 points")
    values = np.asarray(counts[lo:hi + 1], dtype=float)
    if np.any(values <= 0):
        raise InsufficientDataError("counts must be positive on the fit window")
    x, y = np.log(n), np.log(values)
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return float(slope), residual


def growth_report(
    group: str,
    kind: CountKind,
    counts: Sequence[int],
    degree: int,
    window: Optional[Tuple[int, int]] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    subgroup: Optional[str] = None,
) -> GrowthReport:
    window = window or default_window(counts)
    fitted, residual = fit_exponent(counts, window)
    verdict = Verdict.MATCH if abs(fitted - degree) <= tolerance else Verdict.MISMATCH
    if verdict is Verdict.MISMATCH:
        logger.warning("%s %s: fitted %.3f vs degree %d", group, kind.value, fitted, degree)
    return GrowthReport(
        group=group,
        kind=kind,
        subgroup=subgroup,
        degree=degree,
        fitted=fitted,
        window=window,
        residual=residual,
        tolerance=tolerance,
        verdict=verdict,
    )


def cross_check_ranks(spec: GroupSpec, sub: SubgroupSpec, record: BallRecord) -> VerificationReport:
    """
    Compare catalog level ranks of a subgroup with ranks seen in B_r ∩ H ∩ G_j.

    A larger enumerated rank means the catalog generator list is incomplete. Discrepancies
    are reported and never corrected.
    """
    declared = relative_ranks(spec, sub)
    member = sub.predicate.compile(record.layout)
    report = VerificationReport(subject=f"{spec.name}/{sub.name}")
    for j in range(1, spec.nilpotency_class + 1):
        in_level = spec.level(j).predicate.compile(record.layout)
        vectors = {
            project(spec, j, GroupElement(record.layout, key))
            for key in record.order
            if member(key) and in_level(key)
        }
        seen = lattice_rank(vectors)
        report.checks.append(CheckResult(
            name=f"level-{j}-rank",
            passed=seen <= declared[j - 1],
            detail=f"declared {declared[j - 1]}, enumerated {seen} at radius {record.radius}",
        ))
    for check in report.failures():
        logger.warning("%s: %s", report.subject, check.detail)
    return report
