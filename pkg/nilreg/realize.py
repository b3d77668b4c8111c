"""
Pixton-Tsuboi realization over a truncated Schreier ball.

Cosets v of the stabilizer K with |v| <= R are laid out left to right in the
lexicographic order of their chain coordinates. Each I_v is split into
intervals I_{v,j} of length L_{A_v,eps}(j), with A_v chosen so that
|I_v| = (C0 + |v|)^(-1/alpha). The index j counts fundamental domains of the
witness functional mu, so a letter g maps I_{v,j} onto I_{g(v), j + l(g,v)}
through a Tsuboi map. Letters leaving the truncation act as the identity on
I_v (frozen boundary); only cosets with |v| <= R - 1 see the full action.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from nilreg.config import Settings
from nilreg.critreg import StabilizerWitness, verify_witness
from nilreg.errors import (
    ConfigurationError,
    DomainError,
    InsufficientDataError,
    InvariantViolation,
    PreconditionError,
    SchreierTableError,
    TruncationError,
)
from nilreg.group_core import Entries, GroupElement, GroupSpec, coset_canonicalizer
from nilreg.growth import schreier_degree
from nilreg.models import CosetPayload, SystemPayload
from nilreg.tsuboi import (
    flow_array,
    flow_time,
    interval_lengths,
    invert_length,
    log_flow_derivative,
    total_length,
)
from nilreg.wordmetric import SchreierBall, schreier_ball

logger = logging.getLogger(__name__)

FROZEN = -1
MAX_C0_DOUBLINGS = 24
FIT_RADIUS = 4


# --- LENGTH PROFILE ---
@dataclass(frozen=True)
class LengthProfile:
    """A_v with L(A_v) = (C0 + |v|)^(-1/alpha)."""

    alpha: float
    epsilon: float
    c0: float

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha = {self.alpha} must lie in (0, 1)")
        if not 0 < self.epsilon < 1:
            raise DomainError(f"epsilon = {self.epsilon} must lie in (0, 1)")
        if self.c0 <= 1:
            raise DomainError(f"C0 = {self.c0} must exceed 1")

    def target(self, norm: float) -> float:
        return (self.c0 + norm) ** (-1.0 / self.alpha)

    def a_values(self, norms: Sequence[int]) -> np.ndarray:
        cache: Dict[int, float] = {}
        for norm in norms:
            if norm not in cache:
                cache[norm] = invert_length(self.target(norm), self.epsilon)
        return np.array([cache[norm] for norm in norms], dtype=float)


def choose_epsilon(alpha: float, cocycle_degree: int) -> float:
    """An epsilon with 1/(alpha eps) > d' + 1."""
    return min(0.9 / (alpha * (cocycle_degree + 1)), 0.9)


# --- COCYCLE ---
def cocycle(
    spec: GroupSpec,
    witness: StabilizerWitness,
    schreier: SchreierBall,
    g: GroupElement,
    v: int,
    canonical=None,
) -> Tuple[Optional[int], Optional[int]]:
    """(g(v), l(g, v)) with l = mu(h_{g(v)}^-1 g h_v); (None, None) when g(v) leaves the ball."""
    layout = spec.layout
    canonical = canonical or coset_canonicalizer(spec, witness.stabilizer)
    y = layout.multiply(g.entries, schreier.reps[v])
    u = schreier.locate(y, canonical)
    if u is None:
        return None, None
    k = layout.multiply(layout.inverse(schreier.reps[u]), y)
    if not schreier.member(k):
        raise SchreierTableError(
            f"{spec.name}/{witness.stabilizer.name}: h_u^-1 g h_v is not in the stabilizer", v=v, u=u
        )
    return u, witness.mu.evaluate_entries(layout, k)


def cocycle_profile(
    spec: GroupSpec, witness: StabilizerWitness, schreier: SchreierBall
) -> List[Tuple[int, int]]:
    """(r, max |l(f, v)|) over letters f and cosets with |v| <= r."""
    canonical = coset_canonicalizer(spec, witness.stabilizer)
    per_norm = [0] * (schreier.radius + 1)
    for letter in spec.letters()[1:]:
        for v in range(schreier.size):
            _, l = cocycle(spec, witness, schreier, letter.element, v, canonical)
            if l is not None:
                per_norm[schreier.norm(v)] = max(per_norm[schreier.norm(v)], abs(l))
    profile, running = [], 0
    for r, value in enumerate(per_norm):
        running = max(running, value)
        profile.append((r, running))
    return profile


def fit_cocycle_degree(profile: Sequence[Tuple[int, int]]) -> int:
    """Polynomial degree of max |l| against |v| from a log-log fit."""
    points = [(r, m) for r, m in profile if r >= 1 and m > 0]
    if not points:
        return 0
    if len(points) < 2:
        raise InsufficientDataError("the cocycle profile needs at least two positive points")
    r, m = np.array(points, dtype=float).T
    slope = float(np.polyfit(np.log(r), np.log(m), 1)[0])
    return max(0, int(math.ceil(slope - 0.25)))


# --- EVALUATORS ---
class ActionEvaluator:
    """Piecewise Tsuboi maps of one element over the realized intervals."""

    def __init__(self, system: "IntervalSystem", name: str, targets: Sequence[int], shifts: Sequence[int]):
        self.system = system
        self.name = name
        self.targets = np.asarray(targets, dtype=np.int64)
        self.shifts = np.asarray(shifts, dtype=np.int64)
        J, P = system.jrange, system.jpos
        width = 2 * J + 1
        n = system.size
        j = np.arange(-J, J + 1)

        self.dst_left = np.empty(n * width)
        self.dst_right = np.empty(n * width)
        self.log_scale = np.empty(n * width)
        self.t = np.empty(n * width)
        self.valid = np.ones(n * width, dtype=bool)
        for v in range(n):
            block = slice(v * width, (v + 1) * width)
            u = self.targets[v]
            if u == FROZEN:
                self.dst_left[block] = system.positions[v, j + P]
                self.dst_right[block] = system.positions[v, j + P + 1]
                self.log_scale[block] = 0.0
                self.t[block] = 0.0
                continue
            k = j + self.shifts[v]
            ok = (k - 1 >= -P) & (k + 1 <= P)
            kc = np.clip(k, -P + 1, P - 1)
            src, src_prev = system.lengths[v, j + P], system.lengths[v, j + P - 1]
            dst, dst_prev = system.lengths[u, kc + P], system.lengths[u, kc + P - 1]
            self.dst_left[block] = system.positions[u, kc + P]
            self.dst_right[block] = system.positions[u, kc + P + 1]
            self.log_scale[block] = np.log(dst / src)
            self.t[block] = np.log(dst_prev / src_prev) - np.log(dst / src)
            self.valid[block] = ok

    # -- location --
    def locate(self, x: np.ndarray, side: str = "right") -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Flat interval index and local coordinates (u, 1 - u) of each point."""
        system = self.system
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.searchsorted(system.src_left, x, side="right") - 1
        if side == "left":
            on_left_end = (idx > 0) & (x == system.src_left[np.maximum(idx, 0)])
            previous = np.maximum(idx - 1, 0)
            joined = system.src_right[previous] == system.src_left[np.maximum(idx, 0)]
            idx = np.where(on_left_end & joined, previous, idx)
        outside = (idx < 0) | (x > system.src_right[np.maximum(idx, 0)])
        if np.any(outside):
            bad = float(x[np.argmax(outside)])
            raise TruncationError(f"point {bad!r} is outside the realized intervals", point=bad)
        idx = np.maximum(idx, 0)
        left, right = system.src_left[idx], system.src_right[idx]
        width = right - left
        u = np.clip((x - left) / width, 0.0, 1.0)
        ubar = np.clip((right - x) / width, 0.0, 1.0)
        return idx, u, ubar

    def _require_valid(self, idx: np.ndarray) -> None:
        if not np.all(self.valid[idx]):
            first = int(idx[np.argmin(self.valid[idx])])
            raise TruncationError(f"{self.name} leaves the laid-out index range at interval {first}", interval=first)

    def evaluate_local(self, idx: np.ndarray, u: np.ndarray, ubar: np.ndarray) -> np.ndarray:
        self._require_valid(idx)
        y, ybar = flow_array(self.t[idx], u, ubar)
        left, right = self.dst_left[idx], self.dst_right[idx]
        return np.where(y <= 0.5, left + (right - left) * y, right - (right - left) * ybar)

    def log_derivative_local(self, idx: np.ndarray, u: np.ndarray, ubar: np.ndarray) -> np.ndarray:
        self._require_valid(idx)
        return self.log_scale[idx] + log_flow_derivative(self.t[idx], u, ubar)

    # -- public --
    def evaluate(self, x):
        idx, u, ubar = self.locate(x)
        out = self.evaluate_local(idx, u, ubar)
        return float(out[0]) if np.ndim(x) == 0 else out

    def log_derivative(self, x, side: str = "right"):
        idx, u, ubar = self.locate(x, side)
        out = self.log_derivative_local(idx, u, ubar)
        return float(out[0]) if np.ndim(x) == 0 else out

    def derivative(self, x, side: str = "right"):
        return np.exp(self.log_derivative(x, side))


class IntervalSystem:
    """Layout of I_{v,j} for |v| <= R, plus the per-letter moves (g(v), l(g, v))."""

    def __init__(
        self,
        group: str,
        witness: str,
        profile: LengthProfile,
        radius: int,
        jrange: int,
        p_c: int,
        keys: Sequence[Tuple[int, ...]],
        norms: Sequence[int],
        letters: Sequence[str],
        moves: Dict[str, List[Tuple[int, int]]],
        metadata: Optional[dict] = None,
        a_values: Optional[np.ndarray] = None,
    ):
        if jrange < 1:
            raise PreconditionError("jrange must be >= 1", jrange=jrange)
        self.group = group
        self.witness = witness
        self.profile = profile
        self.radius = radius
        self.jrange = jrange
        self.p_c = p_c
        self.keys = [tuple(key) for key in keys]
        self.index = {key: v for v, key in enumerate(self.keys)}
        self.norms = np.asarray(norms, dtype=np.int64)
        self.letters = list(letters)
        self.moves = {name: [tuple(move) for move in value] for name, value in moves.items()}
        self.metadata = dict(metadata or {})
        self.a_values = profile.a_values(self.norms.tolist()) if a_values is None else np.asarray(a_values, dtype=float)
        self._context = None
        self._evaluators: Dict[str, ActionEvaluator] = {}
        self._layout()

    @property
    def size(self) -> int:
        return len(self.keys)

    @property
    def core_complete(self) -> bool:
        return bool(self.jrange >= float(np.max(self.a_values)))

    def _layout(self) -> None:
        max_shift = max((abs(l) for moves in self.moves.values() for _, l in moves), default=0)
        self.jpos = self.jrange + max_shift + 1
        P, J, eps = self.jpos, self.jrange, self.profile.epsilon
        j = np.arange(-P, P + 1)
        self.lengths = np.vstack([interval_lengths(A, eps, j) for A in self.a_values])
        self.totals = np.array([total_length(A, eps) for A in self.a_values])
        self.offsets = np.concatenate([[0.0], np.cumsum(self.totals)[:-1]])
        tails = (self.totals - self.lengths.sum(axis=1)) / 2.0
        starts = self.offsets + tails
        # positions[v, j + P] = x_{v,j}; one extra column closes the last interval
        self.positions = np.hstack([
            starts[:, None],
            starts[:, None] + np.cumsum(self.lengths, axis=1),
        ])
        cols = np.arange(-J, J + 1) + P
        self.src_left = self.positions[:, cols].ravel()
        self.src_right = self.positions[:, cols + 1].ravel()
        self.src_length = self.lengths[:, cols].ravel()

    # -- geometry --
    def coset_of(self, key: Tuple[int, ...]) -> int:
        if key not in self.index:
            raise TruncationError(f"coset {key} is outside the truncation", key=key)
        return self.index[key]

    @property
    def base_coset(self) -> int:
        return int(np.argmin(self.norms))

    def realized_range(self, v: int) -> Tuple[float, float]:
        P, J = self.jpos, self.jrange
        return float(self.positions[v, -J + P]), float(self.positions[v, J + 1 + P])

    def endpoint(self, v: int, j: int) -> float:
        if abs(j) > self.jpos:
            raise TruncationError(f"index {j} is outside the laid-out range", j=j)
        return float(self.positions[v, j + self.jpos])

    def interval_length(self, v: int, j: int) -> float:
        return float(self.lengths[v, j + self.jpos])

    def total(self) -> float:
        return float(np.sum(self.totals))

    # -- evaluators --
    def evaluator(self, letter: str) -> ActionEvaluator:
        if letter not in self._evaluators:
            if letter == "e":
                moves = [(v, 0) for v in range(self.size)]
            elif letter in self.moves:
                moves = self.moves[letter]
            else:
                raise PreconditionError(f"unknown letter '{letter}'", available=self.letters)
            targets, shifts = zip(*moves)
            self._evaluators[letter] = ActionEvaluator(self, letter, targets, shifts)
        return self._evaluators[letter]

    def attach(self, spec: GroupSpec, witness: StabilizerWitness, reps: Sequence[Entries]) -> None:
        """Keep the group data needed to build evaluators of arbitrary elements."""
        self._context = (spec, witness, coset_canonicalizer(spec, witness.stabilizer), list(reps))

    def element_evaluator(self, g: GroupElement, name: str = "") -> ActionEvaluator:
        if self._context is None:
            raise PreconditionError("element evaluators need the group data; rebuild the system")
        spec, witness, canonical, reps = self._context
        layout = spec.layout
        member = witness.stabilizer.predicate.compile(layout)
        targets, shifts = [], []
        for v in range(self.size):
            y = layout.multiply(g.entries, reps[v])
            u = self.index.get(canonical(y))
            if u is None:
                targets.append(FROZEN)
                shifts.append(0)
                continue
            k = layout.multiply(layout.inverse(reps[u]), y)
            if not member(k):
                raise SchreierTableError(f"h_u^-1 g h_v is not in {witness.stabilizer.name}", v=v, u=u)
            targets.append(u)
            shifts.append(witness.mu.evaluate_entries(layout, k))
        return ActionEvaluator(self, name or str(g), targets, shifts)


def _sorted_cosets(schreier: SchreierBall) -> List[int]:
    return sorted(range(schreier.size), key=lambda v: schreier.keys[v])


def _letter_moves(
    spec: GroupSpec, witness: StabilizerWitness, schreier: SchreierBall, order: List[int]
) -> Dict[str, List[Tuple[int, int]]]:
    canonical = coset_canonicalizer(spec, witness.stabilizer)
    position = {v: p for p, v in enumerate(order)}
    moves = {}
    for letter in spec.letters()[1:]:
        row = []
        for v in order:
            u, l = cocycle(spec, witness, schreier, letter.element, v, canonical)
            row.append((FROZEN, 0) if u is None else (position[u], l))
        moves[letter.name] = row
    return moves


def _shift_violations(moves: Dict[str, List[Tuple[int, int]]], a_values: np.ndarray) -> List[Tuple[str, int, int]]:
    return [
        (name, v, l)
        for name, row in moves.items()
        for v, (u, l) in enumerate(row)
        if u != FROZEN and abs(l) >= a_values[v]
    ]


def build_system(
    spec: GroupSpec,
    witness: StabilizerWitness,
    radius: int,
    alpha: float,
    jrange: Optional[int] = None,
    epsilon: Optional[float] = None,
    c0: Optional[float] = None,
    settings: Optional[Settings] = None,
) -> IntervalSystem:
    """
    Lay out the truncated realization and the letter moves.

    C0 doubles from settings.realize_c0_start until |l(g,v)| < A_v on every
    realized pair; an explicit C0 that violates this is a configuration error.
    jrange defaults to ceil(max A_v); a smaller value leaves core parts cut.
    """
    settings = settings or Settings()
    if radius < 0:
        raise PreconditionError("radius must be >= 0", radius=radius)
    if witness.stabilizer.chain is None:
        raise PreconditionError(f"stabilizer {witness.stabilizer.name} has no coset chain", witness=witness.name)
    verify_witness(spec, witness)

    schreier = schreier_ball(spec, witness.stabilizer, radius, settings)
    order = _sorted_cosets(schreier)
    moves = _letter_moves(spec, witness, schreier, order)
    norms = [schreier.norm(v) for v in order]

    fit_ball = schreier if radius >= FIT_RADIUS else schreier_ball(spec, witness.stabilizer, FIT_RADIUS, settings)
    degree_prime = fit_cocycle_degree(cocycle_profile(spec, witness, fit_ball))
    if epsilon is None:
        epsilon = choose_epsilon(alpha, degree_prime)
    elif 1.0 / (alpha * epsilon) <= degree_prime + 1:
        logger.warning("epsilon %.4g does not satisfy 1/(alpha eps) > d' + 1 = %d", epsilon, degree_prime + 1)

    if c0 is None:
        c0 = settings.realize_c0_start
        for _ in range(MAX_C0_DOUBLINGS):
            a_values = LengthProfile(alpha, epsilon, c0).a_values(norms)
            if not _shift_violations(moves, a_values):
                break
            c0 *= 2.0
        else:
            raise ConfigurationError(f"no C0 up to {c0} makes |l(g,v)| < A_v", c0=c0)
    profile = LengthProfile(alpha, epsilon, c0)
    a_values = profile.a_values(norms)
    violations = _shift_violations(moves, a_values)
    if violations:
        name, v, l = violations[0]
        raise ConfigurationError(
            f"|l({name}, v{v})| = {abs(l)} is not below A_v = {a_values[v]:.4g}; use a larger C0",
            letter=name,
            coset=v,
            c0=c0,
        )

    top = float(np.max(a_values))
    if jrange is None:
        jrange = int(math.ceil(top))
    if jrange < top:
        logger.warning("%s/%s: J = %d is below max A_v = %.4g; core parts are cut", spec.name, witness.name, jrange, top)
    if schreier.size * (2 * jrange + 1) > settings.max_intervals:
        raise ConfigurationError(
            f"{schreier.size} cosets with J = {jrange} exceed max_intervals = {settings.max_intervals}"
        )

    system = IntervalSystem(
        group=spec.name,
        witness=witness.name,
        profile=profile,
        radius=radius,
        jrange=jrange,
        p_c=witness.mu.evaluate(witness.central),
        keys=[schreier.keys[v] for v in order],
        norms=norms,
        letters=[letter.name for letter in spec.letters()],
        moves=moves,
        a_values=a_values,
        metadata={
            "boundary": "frozen",
            "safe_radius": max(radius - 1, 0),
            "index_units": "mu",
            "cocycle_degree": degree_prime,
            "schreier_degree": schreier_degree(spec, witness.stabilizer),
            "core_complete": jrange >= top,
        },
    )
    system.attach(spec, witness, [schreier.reps[v] for v in order])
    logger.info(
        "%s/%s: %d cosets, J = %d, C0 = %g, eps = %.4g, total length %.6g",
        spec.name, witness.name, system.size, jrange, c0, epsilon, system.total(),
    )
    return system


# --- MONOTONE ACTION ADAPTER ---
class IntervalAction:
    """The realized letters as a monotone action on points of the line; x0 = x_{[e],0}."""

    def __init__(self, system: IntervalSystem):
        self.system = system
        self.letter_count = len(system.letters)

    def origin(self) -> float:
        return self.system.endpoint(self.system.base_coset, 0)

    def apply(self, letter: int, point: float) -> float:
        return self.system.evaluator(self.system.letters[letter]).evaluate(point)

    def key(self, point: float) -> float:
        return point


# --- HOLDER ESTIMATES ---
def _chebyshev(m: int) -> np.ndarray:
    i = np.arange(m)
    return 0.5 * (1.0 - np.cos(np.pi * (2 * i + 1) / (2 * m)))


def coset_grid(system: IntervalSystem, v: int, points: int = 8) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(flat index, u, 1 - u) for all endpoints x_{v,j} and Chebyshev nodes inside each I_{v,j}."""
    if points < 8:
        raise PreconditionError("the Hölder grid needs at least 8 points per interval", points=points)
    width = 2 * system.jrange + 1
    nodes = np.concatenate([[0.0], _chebyshev(points)])
    flat = np.repeat(np.arange(v * width, (v + 1) * width), nodes.size)
    u = np.tile(nodes, width)
    flat = np.append(flat, (v + 1) * width - 1)
    u = np.append(u, 1.0)
    return flat, u, 1.0 - u


def _grid_x(system: IntervalSystem, flat: np.ndarray, u: np.ndarray) -> np.ndarray:
    return system.src_left[flat] + system.src_length[flat] * u


def holder_seminorm(x: np.ndarray, values: np.ndarray, alpha: float, exact_limit: int = 2048) -> float:
    """max |f(x) - f(y)| / |x - y|^alpha; every pair below exact_limit points, dyadic lags above."""
    order = np.argsort(x)
    x, values = x[order], values[order]
    keep = np.concatenate([[True], np.diff(x) > 0])
    x, values = x[keep], values[keep]
    n = x.size
    if n < 2:
        return 0.0
    if n <= exact_limit:
        dx = np.abs(x[:, None] - x[None, :])
        df = np.abs(values[:, None] - values[None, :])
        np.fill_diagonal(dx, 1.0)
        return float(np.max(df / dx ** alpha))
    best, lag = 0.0, 1
    while lag < n:
        ratio = np.abs(values[lag:] - values[:-lag]) / (x[lag:] - x[:-lag]) ** alpha
        best = max(best, float(np.max(ratio)))
        lag *= 2
    return best


def _check_positive(log_values: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(log_values)):
        raise InvariantViolation(f"{name}: derivative is not positive on the grid")


def holder_constant(evaluator: ActionEvaluator, v: int, alpha: float, points: int = 8) -> float:
    """Grid estimate of the alpha-Hölder constant of log Dg on the realized part of I_v."""
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha = {alpha} must lie in (0, 1]")
    flat, u, ubar = coset_grid(evaluator.system, v, points)
    values = evaluator.log_derivative_local(flat, u, ubar)
    _check_positive(values, evaluator.name)
    return holder_seminorm(_grid_x(evaluator.system, flat, u), values, alpha)


def _interval_grid(system: IntervalSystem, a: float, b: float, points: int) -> np.ndarray:
    inner = system.src_left[(system.src_left > a) & (system.src_left < b)]
    breaks = np.concatenate([[a], inner, [b]])
    nodes = _chebyshev(points)
    segments = breaks[:-1, None] + np.diff(breaks)[:, None] * nodes[None, :]
    return np.sort(np.concatenate([breaks, segments.ravel()]))


def distortion(evaluator: ActionEvaluator, interval: Tuple[float, float], points: int = 8) -> float:
    """kappa(g; I) = max - min of log Dg over a grid of I."""
    x = _interval_grid(evaluator.system, interval[0], interval[1], points)
    values = evaluator.log_derivative(x)
    _check_positive(values, evaluator.name)
    return float(np.max(values) - np.min(values))


def distortion_composition_check(
    first: ActionEvaluator, second: ActionEvaluator, interval: Tuple[float, float], points: int = 8
) -> Tuple[float, float]:
    """(kappa(g2 g1; I), kappa(g1; I) + kappa(g2; g1(I)))."""
    x = _interval_grid(first.system, interval[0], interval[1], points)
    inner = first.log_derivative(x)
    image = first.evaluate(x)
    composed = inner + second.log_derivative(image)
    lhs = float(np.max(composed) - np.min(composed))
    image_interval = (float(first.evaluate(interval[0])), float(first.evaluate(interval[1])))
    rhs = distortion(first, interval, points) + distortion(second, image_interval, points)
    return lhs, rhs


def global_holder_bound(constants: Sequence[float]) -> float:
    """Hölder constant on the whole line from per-I_v constants; Dg = 1 at every outer endpoint."""
    if not constants:
        raise InsufficientDataError("no per-coset constants")
    return 2.0 * max(constants)


def formula_bound(system: IntervalSystem, letter: str, v: int) -> float:
    """(|log L(A_v)/L(A_u)| + |l|/A_v) / L(A_v)^alpha; 0 for frozen cosets."""
    u, l = system.moves[letter][v]
    if u == FROZEN:
        return 0.0
    lv, lu = system.totals[v], system.totals[u]
    return (abs(math.log(lv / lu)) + abs(l) / system.a_values[v]) / lv ** system.profile.alpha


def holder_table(system: IntervalSystem, letter: str, points: int = 8) -> List[Tuple[int, int, float, float, float]]:
    """(v, |v|, A_v, kappa_alpha, formula) per coset."""
    evaluator = system.evaluator(letter)
    alpha = system.profile.alpha
    return [
        (v, int(system.norms[v]), float(system.a_values[v]),
         holder_constant(evaluator, v, alpha, points), formula_bound(system, letter, v))
        for v in range(system.size)
    ]


def fit_formula_constant(rows: Sequence[Tuple[int, int, float, float, float]]) -> Tuple[float, float]:
    """(C, spread): geometric mean of kappa/formula and the max/min ratio over rows with both positive."""
    ratios = np.array([kappa / bound for _, _, _, kappa, bound in rows if kappa > 0 and bound > 0])
    if ratios.size == 0:
        raise InsufficientDataError("no coset with a positive Hölder estimate and formula")
    return float(np.exp(np.mean(np.log(ratios)))), float(ratios.max() / ratios.min())


def shell_maximum(system: IntervalSystem, lo: int, hi: int, points: int = 8) -> float:
    """max over letters and cosets with lo <= |v| <= hi of kappa_alpha."""
    best = 0.0
    for letter in system.letters[1:]:
        evaluator = system.evaluator(letter)
        for v in np.flatnonzero((system.norms >= lo) & (system.norms <= hi)):
            best = max(best, holder_constant(evaluator, int(v), system.profile.alpha, points))
    return best


def boundary_derivatives(evaluator: ActionEvaluator, v: int) -> Tuple[float, float]:
    """Dg at the outermost realized endpoints of I_v."""
    a, b = evaluator.system.realized_range(v)
    return float(evaluator.derivative(a)), float(evaluator.derivative(b, side="left"))


def endpoint_mismatch(evaluator: ActionEvaluator, v: int) -> float:
    """Largest |left - right| derivative gap over interior endpoints x_{v,j}."""
    J, P = evaluator.system.jrange, evaluator.system.jpos
    x = evaluator.system.positions[v, np.arange(-J + 1, J + 1) + P]
    left = evaluator.derivative(x, side="left")
    right = evaluator.derivative(x, side="right")
    return float(np.max(np.abs(left - right)))


# --- BLOW-UP ABOVE CRITICAL ---
def geodesic_ray(system: IntervalSystem, letter: str) -> List[int]:
    """Cosets reached from [e] by repeating a letter while the norm keeps growing."""
    v = system.base_coset
    ray = [v]
    while True:
        u, _ = system.moves[letter][v]
        if u == FROZEN or system.norms[u] <= system.norms[v]:
            return ray
        ray.append(u)
        v = u


def blowup_series(norms: Sequence[int], alpha_prime: float, degree: int, c0: float) -> List[float]:
    """
    |log L_v - log L_u| / L_v^alpha' along consecutive norms, for summable lengths
    L_v = (C0 + |v|)^-p with p = d + 1/4.
    """
    if alpha_prime <= 0:
        raise DomainError(f"alpha' = {alpha_prime} must be positive")
    p = degree + 0.25
    values = []
    for r, r_next in zip(norms, norms[1:]):
        gap = p * abs(math.log((c0 + r_next) / (c0 + r)))
        values.append(gap * (c0 + r) ** (p * alpha_prime))
    return values


# --- DERIVATIVE GROWTH ---
def derivative_growth(system: IntervalSystem, steps: int, points: int = 8, v: Optional[int] = None) -> np.ndarray:
    """
    sup over a grid of I_v of D c^m for m = 0..M, where c shifts the index by p_c.

    Points are tracked as (j, u) so that iterates keep full precision.
    """
    v = system.base_coset if v is None else v
    p = system.p_c
    if p == 0:
        raise PreconditionError("the central element acts trivially on I_c")
    J, P = system.jrange, system.jpos
    reach = steps * abs(p)
    lo, hi = (-J, J - reach) if p > 0 else (-J + reach, J)
    if lo > hi:
        raise TruncationError(
            f"{steps} iterates of c leave the index range +-{J}", escaping_index=J + 1 if p > 0 else -J - 1
        )
    nodes = np.concatenate([[0.0], _chebyshev(points)])
    j = np.repeat(np.arange(lo, hi + 1), nodes.size)
    u = np.tile(nodes, hi - lo + 1)
    ubar = 1.0 - u
    log_d = np.zeros(u.size)
    lengths = system.lengths[v]
    sup = [1.0]
    for _ in range(steps):
        src, src_prev = lengths[j + P], lengths[j + P - 1]
        dst, dst_prev = lengths[j + p + P], lengths[j + p + P - 1]
        t = np.log(dst_prev / src_prev) - np.log(dst / src)
        log_d += np.log(dst / src) + log_flow_derivative(t, u, ubar)
        u, ubar = flow_array(t, u, ubar)
        j = j + p
        sup.append(float(np.exp(np.max(log_d))))
    return np.array(sup)


def fundamental_domain_ratio(system: IntervalSystem, v: Optional[int] = None) -> float:
    """|J'_0| / (2 |I_v|) with J'_0 the union of the p_c intervals I_{v,0..p_c-1}."""
    v = system.base_coset if v is None else v
    p = abs(system.p_c)
    domain = sum(system.interval_length(v, j) for j in range(p))
    return domain / (2.0 * system.totals[v])


def linear_lower_bound_holds(growth: np.ndarray, ratio: float, n: int) -> bool:
    """Some m in [n, 2n] has sup D c^m >= ratio * m."""
    if 2 * n >= growth.size:
        raise PreconditionError(f"growth has {growth.size - 1} steps, fewer than 2n = {2 * n}")
    m = np.arange(n, 2 * n + 1)
    return bool(np.any(growth[n:2 * n + 1] >= ratio * m))


# --- PERSISTENCE ---
def to_payload(system: IntervalSystem) -> SystemPayload:
    return SystemPayload(
        group=system.group,
        witness=system.witness,
        alpha=system.profile.alpha,
        epsilon=system.profile.epsilon,
        c0=system.profile.c0,
        radius=system.radius,
        jrange=system.jrange,
        p_c=system.p_c,
        cosets=[
            CosetPayload(key=list(key), norm=int(norm), a_value=float(a))
            for key, norm, a in zip(system.keys, system.norms, system.a_values)
        ],
        letters=system.letters,
        moves={name: [list(move) for move in row] for name, row in system.moves.items()},
        metadata=system.metadata,
    )


def from_payload(payload: SystemPayload) -> IntervalSystem:
    """Rebuild the layout; lengths are recomputed from the stored A_v."""
    profile = LengthProfile(payload.alpha, payload.epsilon, payload.c0)
    return IntervalSystem(
        group=payload.group,
        witness=payload.witness,
        profile=profile,
        radius=payload.radius,
        jrange=payload.jrange,
        p_c=payload.p_c,
        keys=[tuple(c.key) for c in payload.cosets],
        norms=[c.norm for c in payload.cosets],
        letters=payload.letters,
        moves={name: [tuple(move) for move in row] for name, row in payload.moves.items()},
        metadata=payload.metadata,
        a_values=np.array([c.a_value for c in payload.cosets]),
    )
