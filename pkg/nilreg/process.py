"""
Random processes on word-metric balls.

A path is built block by block: block j has n_j = 2^j letters and multiplies to
an element drawn uniformly from B_{n_j}. Letters act on the left, so
g_n = f_{w_n} g_{n-1} and the letters of a block are the reversed geodesic word
of its element, padded with e.

The right variant puts a block of most-moving-right letters before every
uniform block. The critical variant walks in the abelian quotient that the
witness declares and reads interval lengths from a profile.
"""
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Hashable, Iterable, List, NamedTuple, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import stats

from nilreg.errors import (
    DependencyError,
    DomainError,
    InsufficientDataError,
    InvariantViolation,
    PreconditionError,
    SpecInconsistencyError,
    StatisticalFailure,
)
from nilreg.group_core import Entries, GroupElement, GroupSpec, coset_canonicalizer, get_layout, project
from nilreg.growth import schreier_degree
from nilreg.models import CriticalConstants, ProcessVariant
from nilreg.wordmetric import BallRecord, geodesic_word

logger = logging.getLogger(__name__)

UNIFORMITY_LEVEL = 1e-3
CALIBRATION_STEPS = 64
CALIBRATION_SEEDS = 64
# critical attempts never reuse calibration seeds
CRITICAL_SEED_OFFSET = 10_000


# --- SCHEDULE ---
class Block(NamedTuple):
    start: int
    length: int
    kind: str

    @property
    def end(self) -> int:
        return self.start + self.length


BALL_BLOCK = "ball"
RIGHT_BLOCK = "right"


def block_schedule(steps: int, right: bool = False) -> List[Block]:
    """Blocks meeting steps 1..N; a block covers steps start+1..start+length."""
    blocks = []
    start, j = 0, 0
    while start < steps:
        n = 2 ** j
        if right:
            blocks.append(Block(start, n, RIGHT_BLOCK))
            start += n
            if start >= steps:
                break
        blocks.append(Block(start, n, BALL_BLOCK))
        start += n
        j += 1
    return blocks


def required_radius(steps: int, right: bool = False) -> int:
    return max((b.length for b in block_schedule(steps, right) if b.kind == BALL_BLOCK), default=0)


def _require_radius(record: BallRecord, radius: int) -> None:
    if record.radius < radius:
        raise DependencyError(
            f"{record.group}: the process needs B_{radius} but only B_{record.radius} is enumerated",
            radius=radius,
        )


# --- TRACES ---
@dataclass
class ProcessTrace:
    group: str
    dims: Tuple[int, ...]
    seed: int
    variant: ProcessVariant
    letters: List[int]
    products: List[Entries]
    schedule: List[Block]
    draws: List[int] = field(default_factory=list)
    points: List[Any] = field(default_factory=list)
    norms: List[int] = field(default_factory=list)
    lengths: List[float] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.letters)

    def element(self, n: int) -> GroupElement:
        return GroupElement(get_layout(self.dims), self.products[n])


def _draw_block(record: BallRecord, rng: np.random.Generator, n: int) -> Tuple[List[int], int]:
    index = int(rng.integers(record.counts[n]))
    reading = geodesic_word(record, record.element_at(index))
    return reading[::-1] + [0] * (n - len(reading)), index


def _products(record: BallRecord, letters: Sequence[int]) -> List[Entries]:
    layout = record.layout
    g = layout.identity
    products = [g]
    for w in letters:
        g = layout.multiply(record.letter_entries[w], g)
        products.append(g)
    return products


def _check_record(spec: GroupSpec, record: BallRecord, steps: int) -> None:
    if record.group != spec.name:
        raise PreconditionError(f"ball record is for {record.group}, not {spec.name}")
    if steps < 0:
        raise PreconditionError("the number of steps must be >= 0", steps=steps)


def sample_path(spec: GroupSpec, record: BallRecord, steps: int, seed: int) -> ProcessTrace:
    """Uniform-block process with n_j = 2^j; deterministic given the seed."""
    _check_record(spec, record, steps)
    _require_radius(record, required_radius(steps))
    rng = np.random.default_rng(seed)
    schedule = block_schedule(steps)
    letters, draws = [], []
    for block in schedule:
        word, index = _draw_block(record, rng, block.length)
        letters.extend(word)
        draws.append(index)
    letters = letters[:steps]
    return ProcessTrace(
        group=spec.name,
        dims=spec.dims,
        seed=seed,
        variant=ProcessVariant.PLAIN,
        letters=letters,
        products=_products(record, letters),
        schedule=schedule,
        draws=draws,
    )


# --- MONOTONE ACTIONS ---
class MonotoneAction(Protocol):
    """An order-preserving action of the metric letters on some ordered set of points."""

    letter_count: int

    def origin(self) -> Any: ...

    def apply(self, letter: int, point: Any) -> Any: ...

    def key(self, point: Any) -> Hashable: ...


class IdentityAction:
    def __init__(self, letter_count: int):
        self.letter_count = letter_count

    def origin(self) -> float:
        return 0.0

    def apply(self, letter: int, point: float) -> float:
        return point

    def key(self, point: float) -> float:
        return point


class CosetOrderAction:
    """
    Exact left action on G/H, H the witness kernel, ordered lexicographically.

    A point g(x0) is stored as g; its key is the chain coordinates of gK followed
    by mu of the residual in K. x0 is the point of the identity coset.
    """

    def __init__(self, spec: GroupSpec, witness):
        self.spec = spec
        self.witness = witness
        self._canonical = coset_canonicalizer(spec, witness.stabilizer, with_residual=True)
        if self._canonical is None:
            raise PreconditionError(
                f"{spec.name}/{witness.stabilizer.name} has no coset chain", witness=witness.name
            )
        self._layout = spec.layout
        self._mu = witness.mu.bound(self._layout)
        self._letters = [letter.element.entries for letter in spec.letters()]
        self.letter_count = len(self._letters)

    def origin(self) -> Entries:
        return self._layout.identity

    def apply(self, letter: int, point: Entries) -> Entries:
        return self._layout.multiply(self._letters[letter], point)

    def key(self, point: Entries) -> Tuple[int, ...]:
        coords, residual = self._canonical(point)
        return coords + (sum(c * residual[i] for i, c in self._mu),)


def most_right_sequence(action: MonotoneAction, length: int) -> Tuple[List[int], List[Any]]:
    """Letters u_1..u_n with x_m = max_f f(x_{m-1}); ties go to the lowest letter index."""
    point = action.origin()
    letters, points = [], [point]
    for _ in range(length):
        best, best_key, best_point = 0, None, None
        for idx in range(action.letter_count):
            candidate = action.apply(idx, point)
            key = action.key(candidate)
            if best_key is None or key > best_key:
                best, best_key, best_point = idx, key, candidate
        letters.append(best)
        point = best_point
        points.append(point)
    return letters, points


def sample_path_right(
    spec: GroupSpec,
    record: BallRecord,
    action: MonotoneAction,
    steps: int,
    seed: int,
) -> ProcessTrace:
    """
    Process with a most-moving-right block F_{n_j} before each uniform block.

    Every partial product is checked to keep x0 from moving left.
    """
    _check_record(spec, record, steps)
    schedule = block_schedule(steps, right=True)
    _require_radius(record, required_radius(steps, right=True))
    longest = max((b.length for b in schedule if b.kind == RIGHT_BLOCK), default=0)
    rightmost, _ = most_right_sequence(action, longest)

    rng = np.random.default_rng(seed)
    letters, draws = [], []
    for block in schedule:
        if block.kind == RIGHT_BLOCK:
            letters.extend(rightmost[:block.length])
        else:
            word, index = _draw_block(record, rng, block.length)
            letters.extend(word)
            draws.append(index)
    letters = letters[:steps]

    x0 = action.origin()
    base = action.key(x0)
    point, points = x0, [base]
    for n, w in enumerate(letters, start=1):
        point = action.apply(w, point)
        key = action.key(point)
        if key < base:
            raise InvariantViolation(
                f"{spec.name}, seed {seed}: g_{n}(x0) moved left of x0", step=n, seed=seed
            )
        points.append(key)
    return ProcessTrace(
        group=spec.name,
        dims=spec.dims,
        seed=seed,
        variant=ProcessVariant.RIGHT,
        letters=letters,
        products=_products(record, letters),
        schedule=schedule,
        draws=draws,
        points=points,
    )


# --- CRITICAL PROCESS ---
@dataclass(frozen=True)
class ProfileLengths:
    """l(v) = (c0 + |v|)^(-1/alpha)."""

    alpha: float = 0.45
    c0: float = 2.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"profile exponent alpha = {self.alpha} must lie in (0, 1)")
        if self.c0 <= 0:
            raise DomainError(f"profile offset c0 = {self.c0} must be positive")

    def __call__(self, norm: float) -> float:
        return (self.c0 + norm) ** (-1.0 / self.alpha)


def _is_basis(rows: Sequence[Sequence[int]], d: int) -> bool:
    if len(rows) != d or any(len(row) != d for row in rows):
        return False
    return abs(round(float(np.linalg.det(np.array(rows, dtype=float))))) == 1


def _require_letter_isomorphism(spec: GroupSpec, witness, quotient: GroupSpec, degree: int) -> None:
    """Letter i of G's fset maps to letter i of the quotient's; both fsets must be bases in coordinates."""
    canonical = coset_canonicalizer(spec, witness.stabilizer)
    if canonical is None:
        raise PreconditionError(f"stabilizer {witness.stabilizer.name} has no coset chain", witness=witness.name)
    coords = [canonical(spec.element(name).entries) for name in spec.fset]
    targets = [project(quotient, 1, quotient.element(name)) for name in quotient.fset]
    if not _is_basis(coords, degree):
        raise SpecInconsistencyError(
            f"fset {list(spec.fset)} of {spec.name} is not a basis of G/K", witness=witness.name, coordinates=coords
        )
    if not _is_basis(targets, degree):
        raise SpecInconsistencyError(
            f"fset {list(quotient.fset)} of {quotient.name} is not a basis", witness=witness.name, coordinates=targets
        )


@dataclass
class QuotientWalk:
    """The critical process runs in the abelian quotient G/H declared by a witness."""

    group: str
    witness: str
    quotient: GroupSpec
    record: BallRecord
    lengths: ProfileLengths
    degree: int

    @classmethod
    def for_witness(
        cls,
        spec: GroupSpec,
        witness,
        quotient: GroupSpec,
        record: BallRecord,
        lengths: Optional[ProfileLengths] = None,
    ) -> "QuotientWalk":
        if witness.abelian_quotient != quotient.name:
            raise PreconditionError(
                f"witness {witness.name} declares quotient {witness.abelian_quotient}, not {quotient.name}"
            )
        if len(quotient.fset) != len(spec.fset):
            raise SpecInconsistencyError(
                f"{spec.name} and {quotient.name} have generating sets of different sizes"
            )
        degree = schreier_degree(spec, witness.stabilizer)
        if degree != quotient.levels[0].rank or not quotient.abelian:
            raise SpecInconsistencyError(
                f"{quotient.name} is not free abelian of rank gr(G/K) = {degree}", witness=witness.name
            )
        _require_letter_isomorphism(spec, witness, quotient, degree)
        if record.group != quotient.name:
            raise PreconditionError(f"ball record is for {record.group}, not {quotient.name}")
        return cls(spec.name, witness.name, quotient, record, lengths or ProfileLengths(), degree)

    def trace(self, steps: int, seed: int) -> ProcessTrace:
        _require_radius(self.record, steps)
        trace = sample_path(self.quotient, self.record, steps, seed)
        trace.variant = ProcessVariant.CRITICAL
        trace.norms = [self.record.store[g][0] for g in trace.products]
        trace.lengths = [self.lengths(v) for v in trace.norms]
        return trace


@dataclass
class CriticalStats:
    steps: int
    attempts: int
    seed: int
    root_sum: float
    root_sum_bound: float
    final_length: float
    final_bound: float


def _log_factor(steps: int, d: int) -> float:
    return math.log(max(steps, 2)) ** (1.0 - 1.0 / d)


def _root_sum(trace: ProcessTrace, d: int) -> float:
    return float(np.sum(np.asarray(trace.lengths[1:]) ** (1.0 / d)))


def calibrate_critical(
    walk: QuotientWalk,
    steps: int = CALIBRATION_STEPS,
    seeds: Optional[Sequence[int]] = None,
) -> CriticalConstants:
    """
    C1 and C2 from the ensemble mean at a small scale, times the Markov factor 3.

    The constants are frozen afterwards and reported as calibrated.
    """
    seeds = list(range(CALIBRATION_SEEDS)) if seeds is None else list(seeds)
    if not seeds:
        raise InsufficientDataError("calibration needs at least one seed")
    d = walk.degree
    sums, finals = [], []
    for seed in seeds:
        trace = walk.trace(steps, seed)
        sums.append(_root_sum(trace, d))
        finals.append(trace.lengths[-1])
    c1 = 3.0 * float(np.mean(sums)) / _log_factor(steps, d)
    c2 = 3.0 * float(np.mean(finals)) * steps ** d
    logger.info("%s/%s: calibrated C1 = %.4g, C2 = %.4g at N = %d", walk.group, walk.witness, c1, c2, steps)
    return CriticalConstants(
        c1=c1, c2=c2, d=d, calibration_steps=steps, calibration_seeds=len(seeds), calibrated=True
    )


def critical_trace(
    walk: QuotientWalk,
    steps: int,
    constants: CriticalConstants,
    retries: int = 20,
    seed0: int = 0,
) -> Tuple[ProcessTrace, CriticalStats]:
    """Sample until both the root-sum and the final-length bounds hold."""
    if steps < 1 or steps & (steps - 1):
        raise PreconditionError(f"the critical process needs N a power of 2, got {steps}", steps=steps)
    if constants.d != walk.degree:
        raise PreconditionError(f"constants are for d = {constants.d}, the walk has d = {walk.degree}")
    d = walk.degree
    sum_bound = constants.c1 * _log_factor(steps, d)
    final_bound = constants.c2 / steps ** d
    for attempt in range(1, retries + 1):
        seed = seed0 + CRITICAL_SEED_OFFSET + attempt - 1
        trace = walk.trace(steps, seed)
        root_sum = _root_sum(trace, d)
        final = trace.lengths[-1]
        if root_sum <= sum_bound and final <= final_bound:
            return trace, CriticalStats(steps, attempt, seed, root_sum, sum_bound, final, final_bound)
        logger.debug("critical attempt %d (seed %d) failed: %.4g / %.4g", attempt, seed, root_sum, final)
    raise StatisticalFailure(
        f"{walk.group}/{walk.witness}: no path within {retries} attempts met the bounds at N = {steps}; "
        "the calibrated constants may be too small",
        steps=steps,
        retries=retries,
    )


# --- SUMMABILITY ---
@dataclass
class SummabilityReport:
    alpha: float
    partial_sums: List[List[float]]
    mean_terms: List[float]
    window: Optional[Tuple[int, int]]
    decay_slope: Optional[float]


def summability_report(
    traces: Sequence[ProcessTrace],
    alpha: float,
    lengths: Optional[Callable[[int], float]] = None,
    window: Optional[Tuple[int, int]] = (32, 255),
) -> SummabilityReport:
    """
    S_N = sum_{1<=n<=N} l(v_n)^alpha per trace, and the ensemble mean of l(v_n)^alpha.

    lengths maps a coset norm to its length; without it the trace's own lengths
    are used. The decay slope is a log-log fit of the mean term over the window.
    """
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha = {alpha} must lie in (0, 1]")
    if not traces:
        raise InsufficientDataError("summability needs at least one trace")
    rows = []
    for trace in traces:
        values = [lengths(v) for v in trace.norms] if lengths is not None else list(trace.lengths)
        if not values:
            raise PreconditionError(f"trace for seed {trace.seed} carries no coset lengths")
        rows.append(np.asarray(values[1:], dtype=float) ** alpha)
    width = min(len(row) for row in rows)
    terms = np.vstack([row[:width] for row in rows])
    partial = np.cumsum(terms, axis=1)
    mean_terms = terms.mean(axis=0)

    slope = None
    if window is not None and window[1] <= width:
        lo, hi = window
        n = np.arange(lo, hi + 1, dtype=float)
        slope = float(np.polyfit(np.log(n), np.log(mean_terms[lo - 1:hi]), 1)[0])
    else:
        window = None
    return SummabilityReport(
        alpha=alpha,
        partial_sums=partial.tolist(),
        mean_terms=mean_terms.tolist(),
        window=window,
        decay_slope=slope,
    )


# --- MONTE CARLO ---
def _endpoint_chunk(args) -> Dict[int, List[Entries]]:
    spec, record, action, steps, seeds, at = args
    found: Dict[int, List[Entries]] = {n: [] for n in at}
    for seed in seeds:
        if action is None:
            trace = sample_path(spec, record, steps, seed)
        else:
            trace = sample_path_right(spec, record, action, steps, seed)
        for n in at:
            found[n].append(trace.products[n])
    return found


def endpoint_samples(
    spec: GroupSpec,
    record: BallRecord,
    steps: int,
    seeds: Iterable[int],
    at: Sequence[int] = (16, 32),
    action: Optional[MonotoneAction] = None,
    workers: int = 1,
) -> Dict[int, List[Entries]]:
    """g_n for each requested n over a seed ensemble; keeps only those entries."""
    if any(n > steps or n < 0 for n in at):
        raise PreconditionError(f"sample steps {list(at)} must lie in 0..{steps}")
    seeds = list(seeds)
    if workers <= 1 or action is not None or len(seeds) < 2 * workers:
        return _endpoint_chunk((spec, record, action, steps, seeds, tuple(at)))
    size = -(-len(seeds) // workers)
    jobs = [(spec, record, action, steps, seeds[i:i + size], tuple(at)) for i in range(0, len(seeds), size)]
    merged: Dict[int, List[Entries]] = {n: [] for n in at}
    with ProcessPoolExecutor(max_workers=workers) as executor:
        for part in executor.map(_endpoint_chunk, jobs):
            for n in at:
                merged[n].extend(part[n])
    return merged


def max_point_mass(samples: Sequence[Hashable]) -> float:
    """Largest empirical frequency of a single value."""
    if not samples:
        raise InsufficientDataError("no samples")
    return Counter(samples).most_common(1)[0][1] / len(samples)


def block_uniformity(indices: Sequence[int], support: int, level: float = UNIFORMITY_LEVEL) -> Tuple[float, float, bool]:
    """Chi-square test of ball indices against the uniform law on 0..support-1."""
    if support < 2:
        raise PreconditionError("uniformity needs a support of at least 2 points", support=support)
    observed = np.bincount(np.asarray(indices, dtype=np.int64), minlength=support)
    if observed.size > support:
        raise PreconditionError(f"index {observed.size - 1} outside the support 0..{support - 1}")
    statistic, pvalue = stats.chisquare(observed)
    return float(statistic), float(pvalue), bool(pvalue > level)
