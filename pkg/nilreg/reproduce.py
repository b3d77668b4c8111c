"""
Acceptance recipes, one per criterion id.

Each recipe runs its pipeline end to end and returns an AcceptanceReport; the
CLI turns a failed report into exit code 2.
"""
import logging
import time
from fractions import Fraction
from typing import Callable, Dict, List, Sequence

import numpy as np

from nilreg.canon import Word, commutator_table, length_bound_check, peel_canonical, sort_normalize
from nilreg.catalog import Catalog
from nilreg.config import Settings
from nilreg.critreg import abelian_stab_bound, crit_interval, topologically_free_bound
from nilreg.errors import AcceptanceFailure, InvariantViolation, PreconditionError, StatisticalFailure
from nilreg.growth import bass_guivarch, fit_exponent, relative_degree, schreier_degree
from nilreg.models import AcceptanceReport, CheckResult
from nilreg.process import (
    CosetOrderAction,
    calibrate_critical,
    critical_trace,
    endpoint_samples,
    max_point_mass,
    sample_path_right,
)
from nilreg.realize import (
    build_system,
    derivative_growth,
    endpoint_mismatch,
    fundamental_domain_ratio,
    geodesic_ray,
    blowup_series,
    linear_lower_bound_holds,
    shell_maximum,
)
from nilreg.service import quotient_walk, run_ball
from nilreg.tsuboi import flow, tsuboi_map
from nilreg.wordmetric import geodesic_word, relative_count, sandwich_violations, schreier_ball

logger = logging.getLogger(__name__)

# wall-clock budgets in seconds
BUDGETS = {
    "AC-1": 1.0,
    "AC-2": 300.0,
    "AC-3": 10.0,
    "AC-4": 120.0,
    "AC-5": 600.0,
    "AC-6": 30.0,
    "AC-7": 300.0,
    "AC-8": 120.0,
}

REALIZATION_ALPHA = 0.75
REALIZATION_C0 = 1.5
REALIZATION_RADIUS = 12


def _check(checks: List[CheckResult], name: str, passed: bool, detail: str = "") -> None:
    checks.append(CheckResult(name=name, passed=bool(passed), detail=detail))
    if not passed:
        logger.warning("check %s failed: %s", name, detail)


# --- GROWTH ---
def growth_formula(catalog: Catalog, settings: Settings) -> List[CheckResult]:
    checks: List[CheckResult] = []
    for d in range(1, 5):
        value = bass_guivarch(catalog.group(f"Z{d}"))
        _check(checks, f"degree-Z{d}", value == d, f"D = {value}")
    for name, expected in (("N3", 4), ("N4", 10)):
        value = bass_guivarch(catalog.group(name))
        _check(checks, f"degree-{name}", value == expected, f"D = {value}")
    n3 = catalog.group("N3")
    value = relative_degree(n3, n3.subgroup("Zcenter"))
    _check(checks, "relative-degree-N3-centre", value == 2, f"D_(Z;G) = {value}")
    return checks


def growth_empirics(catalog: Catalog, settings: Settings) -> List[CheckResult]:
    checks: List[CheckResult] = []
    n3 = catalog.group("N3")
    record, _, partial = run_ball(n3, 24, settings)
    _check(checks, "ball-complete", not partial, f"radius {record.radius}")

    fitted, _ = fit_exponent(record.counts)
    _check(checks, "ball-exponent", abs(fitted - 4) <= 0.4, f"fitted {fitted:.4f}")
    centre = n3.subgroup("Zcenter")
    relative = relative_count(record, centre)
    fitted, _ = fit_exponent(relative)
    _check(checks, "relative-exponent-centre", abs(fitted - 2) <= 0.4, f"fitted {fitted:.4f}")

    for name, degree, tolerance in (("K_ac", 1, 0.2), ("Zcenter", 2, 0.4)):
        sub = n3.subgroup(name)
        counts = schreier_ball(n3, sub, 24, settings).counts
        fitted, _ = fit_exponent(counts)
        _check(checks, f"schreier-exponent-{name}", abs(fitted - degree) <= tolerance, f"fitted {fitted:.4f}")
        problems = sandwich_violations(record.counts, counts, relative_count(record, sub), 12)
        _check(checks, f"sandwich-{name}", not problems, "; ".join(problems))
    return checks


# --- CRITICAL VALUES ---
def critical_values(catalog: Catalog, settings: Settings) -> List[CheckResult]:
    checks: List[CheckResult] = []
    for name, expected in (("N4", "3/2"), ("N3", "2"), ("N3xN3", "2")):
        result = crit_interval(catalog.group(name))
        _check(checks, f"crit-{name}", result.value == expected, f"value {result.value}")
    n4 = catalog.group("N4")
    degree = schreier_degree(n4, n4.witness("K_ex74").stabilizer)
    _check(checks, "N4-witness-degree", degree == 1, f"gr(G/K) = {degree}")

    product = catalog.group("N3xN3")
    degrees = {name: abelian_stab_bound(product, product.subgroup(name))[1] for name in product.abelian_candidates}
    _check(checks, "abelian-candidates-degree", all(d >= 2 for d in degrees.values()), str(degrees))
    bound = topologically_free_bound(product)
    _check(checks, "topologically-free-bound", bound == Fraction(3, 2), f"bound {bound}")
    return checks


# --- CANONICAL FORM ---
def canonical_form(catalog: Catalog, settings: Settings, words: int = 1000, length: int = 10) -> List[CheckResult]:
    checks: List[CheckResult] = []
    total = 0
    for name in ("N3", "N4"):
        spec = catalog.group(name)
        record, _, _ = run_ball(spec, 6, settings)
        mismatches = 0
        for index in range(len(record.order)):
            g = record.element_at(index)
            word = Word.from_indices(spec, geodesic_word(record, g))
            form, _, _ = sort_normalize(spec, word, trace_weights=False)
            mismatches += form != peel_canonical(spec, g)
        _check(checks, f"sort-equals-peel-{name}", mismatches == 0,
               f"{mismatches} mismatches over {len(record.order)} elements")
        total += len(record.order)
    _check(checks, "sort-equals-peel-coverage", total >= 10_000, f"{total} elements")

    rng = np.random.default_rng(0)
    increases = 0
    for spec in (catalog.group("N3"), catalog.group("N4")):
        a = 4 * commutator_table(spec).c_comm
        letters = len(spec.letters())
        for _ in range(words // 2):
            word = Word.from_indices(spec, rng.integers(1, letters, size=length).tolist())
            _, weights, _ = sort_normalize(spec, word, n=max(len(word), 1), A=a)
            increases += any(later > earlier for earlier, later in zip(weights, weights[1:]))
    _check(checks, "weights-non-increasing", increases == 0, f"{increases} traces increased")

    n3 = catalog.group("N3")
    record, _, _ = run_ball(n3, 24, settings)
    ratios = [ratio for n, _, ratio in length_bound_check(n3, record)[2] if 4 <= n <= 24]
    band = max(ratios) / min(ratios)
    _check(checks, "level-2-length-band", band <= 2.0, f"max/min = {band:.4f}")
    return checks


# --- PROCESS ---
def process_bounds(catalog: Catalog, settings: Settings, paths: int = 100_000, right_seeds: int = 200) -> List[CheckResult]:
    checks: List[CheckResult] = []
    n3 = catalog.group("N3")
    record, _, _ = run_ball(n3, 32, settings)
    samples = endpoint_samples(n3, record, 32, range(paths), at=(16, 32), workers=settings.workers)
    for n, radius in ((16, 4), (32, 8)):
        mass = max_point_mass(samples[n])
        limit = settings.process_slack / record.counts[radius]
        _check(checks, f"point-mass-{n}", mass <= limit, f"max frequency {mass:.3g} vs {limit:.3g}")

    action = CosetOrderAction(n3, n3.witness("K_ac"))
    try:
        for seed in range(right_seeds):
            sample_path_right(n3, record, action, 32, seed)
        _check(checks, "right-variant-monotone", True, f"{right_seeds} seeds")
    except InvariantViolation as exc:
        _check(checks, "right-variant-monotone", False, exc.message)

    walk = quotient_walk(n3, catalog, 1024, settings, "Zcenter_chain")
    constants = calibrate_critical(walk)
    for steps in (256, 1024):
        try:
            _, stats = critical_trace(walk, steps, constants, retries=settings.critical_retries)
        except StatisticalFailure as exc:
            _check(checks, f"critical-{steps}", False, exc.message)
            continue
        _check(checks, f"critical-{steps}", True,
               f"{stats.attempts} attempts, root sum {stats.root_sum:.4g} <= {stats.root_sum_bound:.4g}")
    return checks


# --- TSUBOI NUMERICS ---
def _random_quadruple(rng: np.random.Generator):
    lengths = rng.uniform(0.05, 2.0, size=4)
    a, c = rng.uniform(-1.0, 1.0, size=2)
    Ip, I = (a, a + lengths[0]), (a + lengths[0], a + lengths[0] + lengths[1])
    Jp, J = (c, c + lengths[2]), (c + lengths[2], c + lengths[2] + lengths[3])
    return Ip, I, Jp, J


def tsuboi_numerics(catalog: Catalog, settings: Settings, quadruples: int = 1000) -> List[CheckResult]:
    checks: List[CheckResult] = []
    rng = np.random.default_rng(6)
    worst_inverse, worst_law = 0.0, 0.0
    for x in rng.uniform(0.01, 0.99, size=50):
        for s, t in rng.uniform(-3.0, 3.0, size=(4, 2)):
            worst_inverse = max(worst_inverse, abs(flow(-t, flow(t, x)) - x))
            worst_law = max(worst_law, abs(flow(s, flow(t, x)) - flow(s + t, x)))
    _check(checks, "flow-round-trip", worst_inverse <= 1e-9, f"max error {worst_inverse:.3g}")
    _check(checks, "flow-group-law", worst_law <= 1e-9, f"max error {worst_law:.3g}")

    worst = 0.0
    for _ in range(quadruples):
        Ip, I, Jp, J = _random_quadruple(rng)
        phi = tsuboi_map(Ip, I, Jp, J)
        left = abs(phi.derivative(I[0]) - (Jp[1] - Jp[0]) / (Ip[1] - Ip[0]))
        right = abs(phi.derivative(I[1]) - (J[1] - J[0]) / (I[1] - I[0]))
        worst = max(worst, left, right)
    _check(checks, "endpoint-derivatives", worst <= 1e-8, f"max error {worst:.3g}")

    worst = 0.0
    for _ in range(20):
        Ip, I, Jp, J = _random_quadruple(rng)
        _, _, Kp, K = _random_quadruple(rng)
        direct = tsuboi_map(Ip, I, Kp, K)
        composed = tsuboi_map(Jp, J, Kp, K)
        first = tsuboi_map(Ip, I, Jp, J)
        x = np.linspace(I[0], I[1], 100)
        worst = max(worst, float(np.max(np.abs(composed.evaluate(first.evaluate(x)) - direct.evaluate(x)))))
    _check(checks, "composition-law", worst <= 1e-9, f"max error {worst:.3g}")
    return checks


# --- REALIZATION ---
def _realization(catalog: Catalog, settings: Settings, radius: int):
    n3 = catalog.group("N3")
    return build_system(n3, n3.witness("K_ac"), radius, REALIZATION_ALPHA, c0=REALIZATION_C0, settings=settings)


def realization_regularity(catalog: Catalog, settings: Settings) -> List[CheckResult]:
    checks: List[CheckResult] = []
    points = settings.grid_points
    half = _realization(catalog, settings, REALIZATION_RADIUS // 2)
    full = _realization(catalog, settings, REALIZATION_RADIUS)
    small = shell_maximum(half, REALIZATION_RADIUS // 4, REALIZATION_RADIUS // 2 - 1, points)
    large = shell_maximum(full, REALIZATION_RADIUS // 2, REALIZATION_RADIUS - 1, points)
    ratio = large / small
    _check(checks, "shell-maximum-stable", ratio < 1.2, f"{large:.4g} / {small:.4g} = {ratio:.4f}")

    degree = full.metadata["schreier_degree"]
    ray = geodesic_ray(full, "b")
    series = blowup_series([int(full.norms[v]) for v in ray], 1.25, degree, full.profile.c0)
    increasing = all(b > a for a, b in zip(series, series[1:]))
    _check(checks, "blow-up-above-critical", increasing and len(series) >= 2,
           f"{series[0]:.4g} -> {series[-1]:.4g} over {len(series)} shells")

    worst = max(
        endpoint_mismatch(full.evaluator(letter), v)
        for letter in full.letters[1:]
        for v in range(full.size)
    )
    _check(checks, "endpoint-derivative-mismatch", worst < 1e-8, f"max gap {worst:.3g}")
    return checks


def kopell_shadow(catalog: Catalog, settings: Settings, steps: int = 200) -> List[CheckResult]:
    checks: List[CheckResult] = []
    system = _realization(catalog, settings, REALIZATION_RADIUS)
    growth = derivative_growth(system, steps, settings.grid_points)
    ratio = fundamental_domain_ratio(system)
    failing = [n for n in (12, 25, 50, 100) if not linear_lower_bound_holds(growth, ratio, n)]
    _check(checks, "linear-subsequence-bound", not failing, f"ratio {ratio:.4g}, failing n = {failing}")
    early, late = float(np.max(growth[:51])), float(np.max(growth[:steps + 1]))
    _check(checks, "derivative-growth", late >= 1.5 * early, f"{early:.4g} -> {late:.4g}")
    return checks


# --- REGISTRY ---
RECIPES: Dict[str, Callable[[Catalog, Settings], List[CheckResult]]] = {
    "AC-1": growth_formula,
    "AC-2": growth_empirics,
    "AC-3": critical_values,
    "AC-4": canonical_form,
    "AC-5": process_bounds,
    "AC-6": tsuboi_numerics,
    "AC-7": realization_regularity,
    "AC-8": kopell_shadow,
}


def criteria(selection: str) -> List[str]:
    if selection == "all":
        return list(RECIPES)
    if selection not in RECIPES:
        raise PreconditionError(f"unknown criterion '{selection}'", available=sorted(RECIPES) + ["all"])
    return [selection]


def run_criterion(criterion: str, catalog: Catalog, settings: Settings) -> AcceptanceReport:
    logger.info("running %s", criterion)
    started = time.monotonic()
    checks = RECIPES[criterion](catalog, settings)
    runtime = time.monotonic() - started
    budget = BUDGETS[criterion]
    _check(checks, "runtime", runtime < budget, f"{runtime:.1f} s of {budget:.0f} s")
    return AcceptanceReport(
        criterion=criterion,
        passed=all(check.passed for check in checks),
        checks=checks,
        runtime_seconds=runtime,
    )


def reproduce(selection: str, catalog: Catalog, settings: Settings) -> List[AcceptanceReport]:
    return [run_criterion(criterion, catalog, settings) for criterion in criteria(selection)]


def require_passed(reports: Sequence[AcceptanceReport]) -> None:
    failed = [report.criterion for report in reports if not report.passed]
    if failed:
        raise AcceptanceFailure(f"acceptance failed for {', '.join(failed)}", criteria=failed)
