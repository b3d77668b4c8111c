"""
Exact arithmetic for catalog nilpotent groups.

Elements are products of unitriangular integer matrices, one per direct factor.
Only the strictly upper entries are stored, flattened into a single tuple of
Python ints; that tuple is the element's hash key everywhere in nilreg.
Positions and functional terms use 1-based (factor, row, col) coordinates.
"""
import itertools
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Dict, Iterable, List, Optional, Sequence, Tuple

from nilreg.errors import (
    CatalogLookupError,
    PreconditionError,
    SpecValidationError,
    StructuralError,
)
from nilreg.models import CheckResult, Position, Term, VerificationReport

if TYPE_CHECKING:
    from nilreg.critreg import StabilizerWitness

logger = logging.getLogger(__name__)

Entries = Tuple[int, ...]

_TOKEN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)(?:\^(-?\d+))?$")


# --- LAYOUT ---
class Layout:
    """Index plan for a tuple of unitriangular factors of fixed dimensions."""

    def __init__(self, dims: Tuple[int, ...]):
        self.dims = tuple(dims)
        self.positions: List[Position] = []
        for factor, n in enumerate(self.dims, start=1):
            for row in range(1, n + 1):
                for col in range(row + 1, n + 1):
                    self.positions.append((factor, row, col))
        self.index: Dict[Position, int] = {pos: i for i, pos in enumerate(self.positions)}
        self.size = len(self.positions)
        self.identity: Entries = (0,) * self.size

        # (AB)_ij = A_ij + B_ij + sum_{i<k<j} A_ik B_kj
        self._products: List[Tuple[int, Tuple[Tuple[int, int], ...]]] = []
        self._inverse_plan: List[Tuple[int, Tuple[Tuple[int, int], ...]]] = []
        for pos in sorted(self.positions, key=lambda p: (p[2] - p[1], p)):
            factor, row, col = pos
            pairs = tuple(
                (self.index[(factor, row, k)], self.index[(factor, k, col)])
                for k in range(row + 1, col)
            )
            self._inverse_plan.append((self.index[pos], pairs))
            if pairs:
                self._products.append((self.index[pos], pairs))

    def multiply(self, a: Entries, b: Entries) -> Entries:
        out = [x + y for x, y in zip(a, b)]
        for idx, pairs in self._products:
            total = out[idx]
            for p, q in pairs:
                total += a[p] * b[q]
            out[idx] = total
        return tuple(out)

    def inverse(self, a: Entries) -> Entries:
        out = [0] * self.size
        for idx, pairs in self._inverse_plan:
            total = -a[idx]
            for p, q in pairs:
                total -= a[p] * out[q]
            out[idx] = total
        return tuple(out)

    def locate(self, position: Sequence[int]) -> int:
        key = tuple(position)
        if key not in self.index:
            raise StructuralError(f"entry {key} is not a strictly upper position for factors {self.dims}")
        return self.index[key]


@lru_cache(maxsize=None)
def get_layout(dims: Tuple[int, ...]) -> Layout:
    return Layout(tuple(dims))


# --- ELEMENTS ---
@dataclass(frozen=True, eq=False)
class GroupElement:
    layout: Layout
    entries: Entries

    @classmethod
    def identity(cls, layout: Layout) -> "GroupElement":
        return cls(layout, layout.identity)

    @classmethod
    def from_matrices(cls, layout: Layout, matrices: Sequence[Sequence[Sequence[int]]]) -> "GroupElement":
        if len(matrices) != len(layout.dims):
            raise StructuralError(f"expected {len(layout.dims)} factor matrices, got {len(matrices)}")
        entries = [0] * layout.size
        for factor, (n, matrix) in enumerate(zip(layout.dims, matrices), start=1):
            if len(matrix) != n or any(len(row) != n for row in matrix):
                raise StructuralError(f"factor {factor} must be a {n}x{n} matrix")
            for r in range(n):
                for c in range(n):
                    value = int(matrix[r][c])
                    if r == c and value != 1:
                        raise StructuralError(f"factor {factor} diagonal entry ({r + 1},{c + 1}) is {value}, not 1")
                    if r > c and value != 0:
                        raise StructuralError(f"factor {factor} entry ({r + 1},{c + 1}) below the diagonal is nonzero")
                    if r < c:
                        entries[layout.index[(factor, r + 1, c + 1)]] = value
        return cls(layout, tuple(entries))

    @classmethod
    def from_entries(cls, layout: Layout, values: Dict[Position, int]) -> "GroupElement":
        entries = [0] * layout.size
        for pos, value in values.items():
            entries[layout.locate(pos)] = int(value)
        return cls(layout, tuple(entries))

    def _check(self, other: "GroupElement") -> None:
        if self.layout.dims != other.layout.dims:
            raise StructuralError(
                f"factor dimensions differ: {self.layout.dims} vs {other.layout.dims}"
            )

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        self._check(other)
        return GroupElement(self.layout, self.layout.multiply(self.entries, other.entries))

    def inverse(self) -> "GroupElement":
        return GroupElement(self.layout, self.layout.inverse(self.entries))

    def commutator(self, other: "GroupElement") -> "GroupElement":
        """[a, b] = a b a^-1 b^-1."""
        self._check(other)
        return self * other * self.inverse() * other.inverse()

    def entry(self, factor: int, row: int, col: int) -> int:
        if row == col:
            return 1
        if row > col:
            return 0
        return self.entries[self.layout.locate((factor, row, col))]

    def matrices(self) -> List[List[List[int]]]:
        return [
            [[self.entry(f, r, c) for c in range(1, n + 1)] for r in range(1, n + 1)]
            for f, n in enumerate(self.layout.dims, start=1)
        ]

    @property
    def is_identity(self) -> bool:
        return not any(self.entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        return self.layout.dims == other.layout.dims and self.entries == other.entries

    def __hash__(self) -> int:
        return hash((self.layout.dims, self.entries))

    def __repr__(self) -> str:
        nonzero = {pos: v for pos, v in zip(self.layout.positions, self.entries) if v}
        return f"GroupElement({nonzero or 'e'})"


def multiply(a: GroupElement, b: GroupElement) -> GroupElement:
    return a * b


def inverse(a: GroupElement) -> GroupElement:
    return a.inverse()


def commutator(a: GroupElement, b: GroupElement) -> GroupElement:
    return a.commutator(b)


def power(g: GroupElement, k: int) -> GroupElement:
    """Exact g^k by repeated squaring."""
    if k < 0:
        g, k = g.inverse(), -k
    layout = g.layout
    result, base = layout.identity, g.entries
    while k:
        if k & 1:
            result = layout.multiply(result, base)
        k >>= 1
        if k:
            base = layout.multiply(base, base)
    return GroupElement(layout, result)


# --- FUNCTIONALS AND PREDICATES ---
@dataclass(frozen=True)
class LinearFunctional:
    terms: Tuple[Term, ...]

    def bound(self, layout: Layout) -> Tuple[Tuple[int, int], ...]:
        return tuple((layout.locate(term[:3]), term[3]) for term in self.terms)

    def evaluate(self, g: GroupElement) -> int:
        return self.evaluate_entries(g.layout, g.entries)

    def evaluate_entries(self, layout: Layout, entries: Entries) -> int:
        return sum(term[3] * entries[layout.locate(term[:3])] for term in self.terms)

    def describe(self) -> str:
        return " + ".join(f"{c}*a[{f}]{r}{col}" for f, r, col, c in self.terms)


@dataclass(frozen=True)
class Predicate:
    """Conjunction of entry == 0 and functional == 0 constraints."""
    vanish: Tuple[Position, ...] = ()
    functionals: Tuple[LinearFunctional, ...] = ()

    def holds(self, g: GroupElement) -> bool:
        layout = g.layout
        for pos in self.vanish:
            if g.entries[layout.locate(pos)] != 0:
                return False
        return all(f.evaluate(g) == 0 for f in self.functionals)

    def compile(self, layout: Layout):
        """Return a fast tester over raw entry tuples."""
        vanish_idx = tuple(layout.locate(pos) for pos in self.vanish)
        bound = tuple(f.bound(layout) for f in self.functionals)

        def test(entries: Entries) -> bool:
            for i in vanish_idx:
                if entries[i]:
                    return False
            for terms in bound:
                if sum(c * entries[i] for i, c in terms):
                    return False
            return True

        return test


# --- SPEC TYPES ---
@dataclass(frozen=True)
class GradedGenerator:
    name: str
    level: int
    index: int
    element: GroupElement


@dataclass(frozen=True)
class LevelData:
    level: int
    predicate: Predicate
    rank: int
    projection: Tuple[LinearFunctional, ...]


@dataclass(frozen=True)
class ChainStep:
    subgroup: str
    functional: LinearFunctional
    transversal_name: str
    transversal: GroupElement


@dataclass(frozen=True)
class SubgroupSpec:
    name: str
    predicate: Predicate
    generators: Tuple[GroupElement, ...]
    generator_words: Tuple[str, ...] = ()
    level_generators: Optional[Dict[int, Tuple[GroupElement, ...]]] = None
    chain: Optional[Tuple[ChainStep, ...]] = None
    center_join: Optional[str] = None
    description: str = ""

    @property
    def has_canonicalizer(self) -> bool:
        return self.chain is not None


@dataclass(frozen=True)
class FLetter:
    """A letter of the metric generating set: e, a generator, or its inverse."""
    name: str
    element: GroupElement


@dataclass(frozen=True)
class CentralCandidate:
    element_name: str
    element: GroupElement
    witnesses: Tuple[str, ...]
    rationale: str = ""


@dataclass
class GroupSpec:
    name: str
    dims: Tuple[int, ...]
    abelian: bool
    center_rank: int
    generators: Dict[str, GradedGenerator]
    fset: Tuple[str, ...]
    levels: Tuple[LevelData, ...]
    elements: Dict[str, GroupElement] = field(default_factory=dict)
    subgroups: Dict[str, SubgroupSpec] = field(default_factory=dict)
    witnesses: Dict[str, "StabilizerWitness"] = field(default_factory=dict)
    central_candidates: Tuple[CentralCandidate, ...] = ()
    abelian_candidates: Tuple[str, ...] = ()
    description: str = ""
    source: Dict = field(default_factory=dict)

    @property
    def layout(self) -> Layout:
        return get_layout(self.dims)

    @property
    def nilpotency_class(self) -> int:
        return len(self.levels)

    def identity(self) -> GroupElement:
        return GroupElement.identity(self.layout)

    def level(self, j: int) -> LevelData:
        if 1 <= j <= len(self.levels):
            return self.levels[j - 1]
        if j == len(self.levels) + 1:
            return LevelData(j, Predicate(vanish=tuple(self.layout.positions)), 0, ())
        raise PreconditionError(f"{self.name} has no level {j}", level=j)

    def in_level(self, j: int, g: GroupElement) -> bool:
        return self.level(j).predicate.holds(g)

    def graded(self, j: int) -> List[GradedGenerator]:
        return sorted((g for g in self.generators.values() if g.level == j), key=lambda g: g.index)

    def letters(self) -> List[FLetter]:
        """The metric generating set: e, the fset generators, then their inverses."""
        identity = self.identity()
        positives = [FLetter(name, self.generators[name].element) for name in self.fset]
        negatives = [FLetter(f"{name}^-1", self.generators[name].element.inverse()) for name in self.fset]
        return [FLetter("e", identity)] + positives + negatives

    def element(self, name: str) -> GroupElement:
        if name in self.generators:
            return self.generators[name].element
        if name in self.elements:
            return self.elements[name]
        if name == "e":
            return self.identity()
        available = sorted(list(self.generators) + list(self.elements))
        raise CatalogLookupError(f"unknown element '{name}' in {self.name}", available=available)

    def subgroup(self, name: str) -> SubgroupSpec:
        if name not in self.subgroups:
            raise CatalogLookupError(
                f"unknown subgroup '{name}' in {self.name}", available=sorted(self.subgroups)
            )
        return self.subgroups[name]

    def witness(self, name: str) -> "StabilizerWitness":
        if name not in self.witnesses:
            raise CatalogLookupError(
                f"unknown witness '{name}' in {self.name}", available=sorted(self.witnesses)
            )
        return self.witnesses[name]

    def parse_word(self, text: str) -> GroupElement:
        return parse_word(self, text)


def parse_tokens(text: str) -> List[Tuple[str, int]]:
    tokens = []
    for token in text.replace("*", " ").split():
        match = _TOKEN.match(token)
        if not match:
            raise CatalogLookupError(f"cannot parse word token '{token}'")
        tokens.append((match.group(1), int(match.group(2)) if match.group(2) else 1))
    return tokens


def parse_word(spec: GroupSpec, text: str) -> GroupElement:
    """Multiply out a word like 'b a b a^-1' or 'c1 c2^3' left to right."""
    result = spec.identity()
    for name, exponent in parse_tokens(text):
        result = result * power(spec.element(name), exponent)
    return result


# --- OPERATIONS ---
def is_member(sub: SubgroupSpec, g: GroupElement) -> bool:
    return sub.predicate.holds(g)


def project(spec: GroupSpec, j: int, g: GroupElement) -> Tuple[int, ...]:
    level = spec.level(j)
    if not level.predicate.holds(g):
        raise PreconditionError(f"element is not in level {j} of {spec.name}", level=j, element=g)
    return tuple(f.evaluate(g) for f in level.projection)


def lattice_rank(vectors: Iterable[Sequence[int]]) -> int:
    """Rank of the integer lattice spanned by the vectors (fraction-free elimination)."""
    rows = [list(map(int, v)) for v in vectors]
    if not rows:
        return 0
    width = len(rows[0])
    if any(len(row) != width for row in rows):
        raise StructuralError("lattice_rank needs vectors of equal length")
    rows = [row for row in rows if any(row)]
    rank = 0
    for col in range(width):
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        head = rows[rank]
        for i in range(rank + 1, len(rows)):
            factor = rows[i][col]
            if factor:
                reduced = [head[col] * x - factor * y for x, y in zip(rows[i], head)]
                divisor = 0
                for x in reduced:
                    divisor = _gcd(divisor, x)
                rows[i] = [x // divisor for x in reduced] if divisor > 1 else reduced
        rank += 1
        if rank == len(rows):
            break
    return rank


def _gcd(a: int, b: int) -> int:
    a, b = abs(a), abs(b)
    while b:
        a, b = b, a % b
    return a


def canonicalize_coset(spec: GroupSpec, sub: SubgroupSpec, g: GroupElement) -> Tuple[int, ...]:
    """
    Coordinates of the left coset gK along the subgroup's Z-chain.

    Divides g <- t_i^{-a_i} g with a_i = lambda_i(g) at each step; two elements
    share a coset iff their coordinates agree, and the lexicographic order of
    the coordinates is the dynamical order of cosets.
    """
    if sub.chain is None:
        raise PreconditionError(f"subgroup {sub.name} has no coset chain", subgroup=sub.name)
    coords = []
    x = g
    for step in sub.chain:
        a = step.functional.evaluate(x)
        if a:
            x = power(step.transversal, -a) * x
        coords.append(a)
    return tuple(coords)


def coset_canonicalizer(spec: GroupSpec, sub: SubgroupSpec, with_residual: bool = False):
    """
    Fast canonicalizer over raw entry tuples, or None without a chain.

    With with_residual the function returns (coordinates, residual entries), the
    residual being the element of K left after the last division.
    """
    if sub.chain is None:
        return None
    layout = spec.layout
    steps = [(step.functional.bound(layout), step.transversal) for step in sub.chain]
    inverses = {}

    def canonical(entries: Entries) -> Tuple[int, ...]:
        coords = []
        x = entries
        for position, (terms, transversal) in enumerate(steps):
            a = sum(c * x[i] for i, c in terms)
            if a:
                key = (position, a)
                shift = inverses.get(key)
                if shift is None:
                    shift = power(transversal, -a).entries
                    if len(inverses) < 100_000:
                        inverses[key] = shift
                x = layout.multiply(shift, x)
            coords.append(a)
        if with_residual:
            return tuple(coords), x
        return tuple(coords)

    return canonical


# --- VERIFICATION ---
SAMPLE_LENGTH = 4


def _level_letters(spec: GroupSpec, j: int) -> List[Tuple[str, GroupElement]]:
    """Graded generators of levels >= j and their inverses."""
    letters = []
    for gen in spec.generators.values():
        if gen.level >= j:
            letters.append((gen.name, gen.element))
            letters.append((f"{gen.name}^-1", gen.element.inverse()))
    return letters


def _level_samples(spec: GroupSpec, j: int, length: int = SAMPLE_LENGTH) -> List[Tuple[str, GroupElement]]:
    """Distinct elements spelled by words of length <= `length` in the level-j letters, shortest word kept."""
    letters = _level_letters(spec, j)
    samples: Dict[GroupElement, str] = {spec.identity(): "e"}
    layer = [("", spec.identity())]
    for _ in range(length):
        grown = []
        for word, element in layer:
            for name, letter in letters:
                product = element * letter
                if product not in samples:
                    samples[product] = f"{word} {name}".strip()
                    grown.append((samples[product], product))
        layer = grown
    return [(name, element) for element, name in samples.items()]


def verify_spec(spec: GroupSpec, strict: bool = True) -> VerificationReport:
    """
    Falsify the catalog's lower-central-series data.

    Checks nestedness, graded generators, commutator inclusions [G_i, G_j] in
    G_{i+j}, and that each projection vanishes on the next level and is additive.
    Inclusion and additivity are sampled on words of length <= SAMPLE_LENGTH
    paired with single generator letters.
    """
    report = VerificationReport(subject=spec.name)
    m = spec.nilpotency_class
    checks = report.checks

    unknown = [name for name in spec.fset if name not in spec.generators]
    checks.append(CheckResult(
        name="fset",
        passed=not unknown,
        detail=f"unknown fset generators {unknown}" if unknown else "fset names graded generators",
    ))

    # nestedness: vanish sets grow and each level-j generator leaves G_{j+1}
    problems = []
    for j in range(1, m + 1):
        lower, upper = set(spec.level(j).predicate.vanish), set(spec.level(j + 1).predicate.vanish)
        if not lower <= upper:
            problems.append(f"G_{j + 1} predicate does not contain G_{j}'s constraints {sorted(lower - upper)}")
        for gen in spec.graded(j):
            if spec.in_level(j + 1, gen.element):
                problems.append(f"generator {gen.name} of level {j} passes the G_{j + 1} predicate")
    checks.append(CheckResult(name="nestedness", passed=not problems, detail="; ".join(problems)))

    problems = []
    for j in range(1, m + 1):
        graded = spec.graded(j)
        if len(graded) != spec.level(j).rank:
            problems.append(f"level {j} has {len(graded)} graded generators for rank {spec.level(j).rank}")
        for gen in graded:
            if not spec.in_level(j, gen.element):
                problems.append(f"{gen.name} fails the G_{j} predicate")
                continue
            expected = tuple(1 if i == gen.index else 0 for i in range(1, spec.level(j).rank + 1))
            got = project(spec, j, gen.element)
            if got != expected:
                problems.append(f"phi_{j}({gen.name}) = {got}, expected {expected}")
    checks.append(CheckResult(name="graded-basis", passed=not problems, detail="; ".join(problems)))

    samples = {j: _level_samples(spec, j) for j in range(1, m + 1)}
    letters = {j: _level_letters(spec, j) for j in range(1, m + 1)}

    # sampled words against single letters; [x, y] is the inverse of [y, x]
    problems = []
    for i in range(1, m + 1):
        for j in range(i, m + 1):
            target = min(i + j, m + 1)
            pairs = itertools.product(samples[i], letters[j])
            if j > i:
                pairs = itertools.chain(pairs, itertools.product(letters[i], samples[j]))
            for (nx, x), (ny, y) in pairs:
                if not spec.in_level(target, x.commutator(y)):
                    problems.append(f"[{nx}, {ny}] not in G_{target}")
                    break
            if problems:
                break
        if problems:
            break
    checks.append(CheckResult(name="commutator-inclusion", passed=not problems, detail="; ".join(problems)))

    problems = []
    for j in range(1, m + 1):
        projection = spec.level(j).projection
        for gen in spec.generators.values():
            if gen.level > j and any(f.evaluate(gen.element) for f in projection):
                problems.append(f"phi_{j}({gen.name}) is nonzero on G_{j + 1}")
    checks.append(CheckResult(name="projection-vanishing", passed=not problems, detail="; ".join(problems)))

    problems = []
    for j in range(1, m + 1):
        in_level = [(n, g) for n, g in samples[j] if spec.in_level(j, g)]
        level_letters = [(n, g) for n, g in letters[j] if spec.in_level(j, g)]
        for (nx, x), (ny, y) in itertools.product(in_level, level_letters):
            lhs = project(spec, j, x * y)
            rhs = tuple(p + q for p, q in zip(project(spec, j, x), project(spec, j, y)))
            if lhs != rhs:
                problems.append(f"phi_{j}({nx} * {ny}) is not additive")
                break
    checks.append(CheckResult(name="projection-homomorphism", passed=not problems, detail="; ".join(problems)))

    problems = []
    for sub in spec.subgroups.values():
        for word, gen in zip(sub.generator_words, sub.generators):
            if not sub.predicate.holds(gen):
                problems.append(f"{sub.name}: generator {word} fails the membership predicate")
        for j, gens in (sub.level_generators or {}).items():
            for gen in gens:
                if not (sub.predicate.holds(gen) and spec.in_level(j, gen)):
                    problems.append(f"{sub.name}: H_{j} generator {gen} fails H or G_{j}")
    checks.append(CheckResult(name="subgroup-generators", passed=not problems, detail="; ".join(problems)))

    for check in report.failures():
        logger.warning("%s: check %s failed: %s", spec.name, check.name, check.detail)
    if strict and not report.passed:
        names = ", ".join(c.name for c in report.failures())
        raise SpecValidationError(f"{spec.name} failed verification: {names}", report=report, group=spec.name)
    return report
