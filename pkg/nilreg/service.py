"""
Service layer between the CLI and the library.

Each run_* function computes one command's result and returns rows and
pydantic reports; writing files and manifests is kept separate so that the
acceptance recipes can reuse the same computations.
"""
import csv
import json
import logging
import time
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Union

from pydantic import BaseModel

from nilreg import __version__
from nilreg.canon import Word, peel_canonical, sort_normalize
from nilreg.catalog import Catalog
from nilreg.config import Settings
from nilreg.critreg import StabilizerWitness, crit_interval, verify_witness
from nilreg.errors import BallBudgetExceeded, PreconditionError, SpecValidationError, WitnessVerificationError
from nilreg.group_core import GroupSpec, verify_spec
from nilreg.growth import bass_guivarch, growth_report, schreier_degree
from nilreg.models import (
    CanonReport,
    CountKind,
    CritResult,
    GrowthReport,
    ProcessSummary,
    ProcessVariant,
    RunManifest,
    SystemPayload,
    VerificationReport,
    fmt_float,
    fmt_fraction,
)
from nilreg.process import (
    CosetOrderAction,
    QuotientWalk,
    calibrate_critical,
    critical_trace,
    required_radius,
    sample_path,
    sample_path_right,
)
from nilreg.realize import IntervalSystem, build_system, from_payload, holder_table, to_payload
from nilreg.wordmetric import BallCache, BallRecord, ball, schreier_ball

logger = logging.getLogger(__name__)

Row = Sequence[Any]

BALL_COLUMNS = ("n", "count")
PROCESS_COLUMNS = ("seed", "n", "letter", "coset", "length")
HOLDER_COLUMNS = ("v", "norm", "A_v", "kappa_alpha", "formula_bound")


# --- OUTPUT ---
def _cell(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return "" if value is None else str(value).lower()
    if isinstance(value, float):
        return fmt_float(value)
    if isinstance(value, Fraction):
        return fmt_fraction(value)
    return str(value)


def write_csv(path: Union[str, Path], header: Sequence[str], rows: Iterable[Row]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(value) for value in row])
    return path


def write_json(path: Union[str, Path], model: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def manifest_path(out: Union[str, Path]) -> Path:
    return Path(f"{out}.manifest.json")


def build_manifest(
    command: str,
    settings: Settings,
    catalog: Catalog,
    outputs: Sequence[Union[str, Path]],
    started: float,
    seeds: Sequence[int] = (),
    options: Optional[dict] = None,
    budget: Optional[float] = None,
    partial: bool = False,
) -> RunManifest:
    config = {"settings": settings.model_dump(), "options": options or {}}
    return RunManifest(
        command=command,
        config=json.loads(json.dumps(config, default=str)),
        catalog_hash=catalog.content_hash,
        seeds=list(seeds),
        tool_version=__version__,
        wall_clock_budget=budget,
        wall_clock_seconds=time.monotonic() - started,
        outputs=[str(path) for path in outputs],
        partial=partial,
    )


def load_manifest(path: Union[str, Path]) -> RunManifest:
    return RunManifest.model_validate_json(Path(path).read_text(encoding="utf-8"))


# --- BALLS ---
def _cache(settings: Settings) -> Optional[BallCache]:
    return BallCache(settings.cache_dir) if settings.cache_dir else None


def run_ball(spec: GroupSpec, radius: int, settings: Settings) -> Tuple[BallRecord, List[Row], bool]:
    """(record, (n, #B_n) rows, partial); a budget trip returns the completed prefix."""
    try:
        record = ball(spec, radius, settings, cache=_cache(settings))
        partial = False
    except BallBudgetExceeded as exc:
        if exc.partial is None:
            raise
        logger.warning("%s: keeping the partial ball up to radius %d", spec.name, exc.completed_radius)
        record, partial = exc.partial, True
    rows = [(n, count) for n, count in enumerate(record.counts)]
    return record, rows, partial


def run_schreier(spec: GroupSpec, subgroup: str, radius: int, settings: Settings) -> List[Row]:
    result = schreier_ball(spec, spec.subgroup(subgroup), radius, settings)
    return [(n, count) for n, count in enumerate(result.counts)]


# --- GROWTH ---
def default_growth_radius(degree: int) -> int:
    """Largest radius whose ball stays around 10^6 elements for a given degree."""
    if degree <= 4:
        return 24
    if degree <= 6:
        return 14
    return 8


def run_growth(
    spec: GroupSpec,
    settings: Settings,
    subgroup: Optional[str] = None,
    radius: Optional[int] = None,
) -> Tuple[GrowthReport, List[Row], bool]:
    """Ball growth, or Schreier growth of G/K when a subgroup is given."""
    if subgroup is None:
        degree = bass_guivarch(spec)
        radius = radius if radius is not None else default_growth_radius(degree)
        record, rows, partial = run_ball(spec, radius, settings)
        counts = record.counts
        kind = CountKind.BALL
    else:
        sub = spec.subgroup(subgroup)
        degree = schreier_degree(spec, sub)
        radius = radius if radius is not None else 24
        counts = schreier_ball(spec, sub, radius, settings).counts
        rows, partial = [(n, count) for n, count in enumerate(counts)], False
        kind = CountKind.SCHREIER
    report = growth_report(
        spec.name, kind, counts, degree, tolerance=settings.fit_tolerance, subgroup=subgroup
    )
    return report, rows, partial


# --- CANON ---
def run_canon(spec: GroupSpec, text: str, trace_weights: bool = False) -> CanonReport:
    word = Word.parse(spec, text)
    form, weights, steps = sort_normalize(spec, word, trace_weights=trace_weights)
    return CanonReport(
        group=spec.name,
        word=str(word),
        exponents=form.to_lists(),
        steps=steps,
        weights=[fmt_fraction(w) for w in weights],
        agrees_with_peel=peel_canonical(spec, word.product) == form,
    )


# --- VERIFICATION AND CRIT ---
def run_verify_spec(spec: GroupSpec) -> VerificationReport:
    report = verify_spec(spec, strict=False)
    if not report.passed:
        raise SpecValidationError(
            f"{spec.name} fails {len(report.failures())} spec checks", report=report, group=spec.name
        )
    return report


def run_verify_witness(spec: GroupSpec, witness: str) -> VerificationReport:
    report = verify_witness(spec, spec.witness(witness), strict=False)
    if not report.passed:
        first = report.failures()[0]
        raise WitnessVerificationError(
            f"witness {witness} fails clause {first.name}: {first.detail}", clause=first.name, report=report
        )
    return report


def run_crit(spec: GroupSpec) -> CritResult:
    return crit_interval(spec)


# --- PROCESS ---
def default_witness(spec: GroupSpec, quotient: bool = False) -> StabilizerWitness:
    """First witness with a coset chain, or with a declared abelian quotient."""
    for w in spec.witnesses.values():
        if quotient and w.abelian_quotient:
            return w
        if not quotient and w.stabilizer.has_canonicalizer:
            return w
    need = "an abelian quotient" if quotient else "a coset chain"
    raise PreconditionError(f"{spec.name} has no witness with {need}", group=spec.name)


def _coset_label(key) -> str:
    return "/".join(str(x) for x in key)


def quotient_walk(spec: GroupSpec, catalog: Catalog, steps: int, settings: Settings,
                  witness: Optional[str] = None) -> QuotientWalk:
    w = spec.witness(witness) if witness else default_witness(spec, quotient=True)
    if not w.abelian_quotient:
        raise PreconditionError(f"witness {w.name} declares no abelian quotient", witness=w.name)
    quotient = catalog.group(w.abelian_quotient)
    record, _, _ = run_ball(quotient, steps, settings)
    return QuotientWalk.for_witness(spec, w, quotient, record)


def run_process(
    spec: GroupSpec,
    catalog: Catalog,
    variant: ProcessVariant,
    steps: int,
    seeds: Sequence[int],
    settings: Settings,
    witness: Optional[str] = None,
) -> Tuple[List[Row], ProcessSummary]:
    """Rows (seed, n, letter, coset, length) for every step of every seed."""
    rows: List[Row] = []
    summary = ProcessSummary(group=spec.name, variant=variant, steps=steps, seeds=list(seeds))
    if variant is ProcessVariant.CRITICAL:
        walk = quotient_walk(spec, catalog, steps, settings, witness)
        constants = calibrate_critical(walk)
        summary.constants = constants
        used = 0
        for seed in seeds:
            trace, stats = critical_trace(walk, steps, constants, retries=settings.critical_retries, seed0=seed)
            used = max(used, stats.attempts)
            names = walk.record.letter_names
            for n in range(trace.steps + 1):
                letter = names[trace.letters[n - 1]] if n else ""
                rows.append((stats.seed, n, letter, _coset_label(trace.products[n]), trace.lengths[n]))
        summary.retries_used = used
        return rows, summary

    right = variant is ProcessVariant.RIGHT
    record, _, _ = run_ball(spec, required_radius(steps, right=right), settings)
    if witness:
        w = spec.witness(witness)
    else:
        chained = [x for x in spec.witnesses.values() if x.stabilizer.has_canonicalizer]
        w = chained[0] if chained else None
    action = CosetOrderAction(spec, w) if w is not None and w.stabilizer.has_canonicalizer else None
    if right and action is None:
        raise PreconditionError(f"the right process on {spec.name} needs a witness with a coset chain")
    for seed in seeds:
        if right:
            trace = sample_path_right(spec, record, action, steps, seed)
        else:
            trace = sample_path(spec, record, steps, seed)
        for n in range(trace.steps + 1):
            letter = record.letter_names[trace.letters[n - 1]] if n else ""
            coset = _coset_label(action.key(trace.products[n])) if action is not None else ""
            rows.append((seed, n, letter, coset, None))
    return rows, summary


# --- REALIZATION ---
def run_realize(
    spec: GroupSpec,
    witness: str,
    alpha: float,
    radius: int,
    settings: Settings,
    jrange: Optional[int] = None,
    c0: Optional[float] = None,
) -> Tuple[IntervalSystem, SystemPayload]:
    system = build_system(spec, spec.witness(witness), radius, alpha, jrange=jrange, c0=c0, settings=settings)
    return system, to_payload(system)


def load_system(path: Union[str, Path]) -> IntervalSystem:
    payload = SystemPayload.model_validate_json(Path(path).read_text(encoding="utf-8"))
    return from_payload(payload)


def run_holder(system: IntervalSystem, generator: str, settings: Settings) -> List[Row]:
    return [
        (v, norm, a_value, kappa, bound)
        for v, norm, a_value, kappa, bound in holder_table(system, generator, settings.grid_points)
    ]
