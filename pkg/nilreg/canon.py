"""
Canonical coordinates and weight-controlled sorting.

peel_canonical reads exponents level by level from the projections. The sorter
reaches the same coordinates by exchanging adjacent disordered letters with
ba = ab[b^-1, a^-1], which is how the canonical-length bounds are proved.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from nilreg.errors import CatalogLookupError, PreconditionError, SpecInconsistencyError, StepBudgetExceeded
from nilreg.group_core import GroupElement, GroupSpec, parse_tokens, power, project
from nilreg.wordmetric import BallRecord

logger = logging.getLogger(__name__)


# --- TYPES ---
@dataclass(frozen=True)
class Letter:
    name: str
    level: int
    index: int
    sign: int

    @property
    def key(self) -> Tuple[int, int]:
        return self.level, self.index

    def inverse(self) -> "Letter":
        return Letter(self.name, self.level, self.index, -self.sign)

    def __str__(self) -> str:
        return self.name if self.sign > 0 else f"{self.name}^-1"


@dataclass(frozen=True)
class CanonicalForm:
    exponents: Tuple[Tuple[int, ...], ...]

    def level(self, j: int) -> Tuple[int, ...]:
        return self.exponents[j - 1]

    def to_lists(self) -> List[List[int]]:
        return [list(level) for level in self.exponents]


class Word:
    """A sequence of graded letters with its product cached."""

    def __init__(self, spec: GroupSpec, letters: Sequence[Letter]):
        self.spec = spec
        self.letters = tuple(letters)
        self._product: Optional[GroupElement] = None

    @classmethod
    def parse(cls, spec: GroupSpec, text: str) -> "Word":
        letters = []
        for name, exponent in parse_tokens(text):
            letters.extend([letter_for(spec, name, 1 if exponent > 0 else -1)] * abs(exponent))
        return cls(spec, letters)

    @classmethod
    def from_indices(cls, spec: GroupSpec, indices: Sequence[int]) -> "Word":
        """Word from metric-letter indices (0 = e is dropped)."""
        k = len(spec.fset)
        letters = []
        for idx in indices:
            if idx == 0:
                continue
            name = spec.fset[(idx - 1) % k]
            letters.append(letter_for(spec, name, 1 if idx <= k else -1))
        return cls(spec, letters)

    @property
    def product(self) -> GroupElement:
        if self._product is None:
            result = self.spec.identity()
            for letter in self.letters:
                result = result * letter_element(self.spec, letter)
            self._product = result
        return self._product

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return " ".join(str(letter) for letter in self.letters) or "e"


def letter_for(spec: GroupSpec, name: str, sign: int) -> Letter:
    if name not in spec.generators:
        raise CatalogLookupError(
            f"'{name}' is not a graded generator of {spec.name}", available=sorted(spec.generators)
        )
    gen = spec.generators[name]
    return Letter(name, gen.level, gen.index, sign)


def letter_element(spec: GroupSpec, letter: Letter) -> GroupElement:
    element = spec.generators[letter.name].element
    return element if letter.sign > 0 else element.inverse()


# --- PEELING ---
def peel_canonical(spec: GroupSpec, g: GroupElement) -> CanonicalForm:
    """Exponents a_{i,j} with g = prod_j prod_i f_{i,j}^{a_{i,j}} in (level, index) order."""
    residual = g
    exponents = []
    for j in range(1, spec.nilpotency_class + 1):
        if not spec.in_level(j, residual):
            raise SpecInconsistencyError(f"{spec.name}: residual left G_{j} while peeling", level=j)
        a = project(spec, j, residual)
        exponents.append(a)
        residual = level_product(spec, j, a).inverse() * residual
    if not residual.is_identity:
        raise SpecInconsistencyError(f"{spec.name}: nonzero residual {residual} after peeling all levels")
    return CanonicalForm(tuple(exponents))


def level_product(spec: GroupSpec, j: int, exponents: Sequence[int]) -> GroupElement:
    result = spec.identity()
    for gen, a in zip(spec.graded(j), exponents):
        if a:
            result = result * power(gen.element, a)
    return result


def reconstruct(spec: GroupSpec, form: CanonicalForm) -> GroupElement:
    result = spec.identity()
    for j, exponents in enumerate(form.exponents, start=1):
        result = result * level_product(spec, j, exponents)
    return result


def canonical_letters(spec: GroupSpec, form: CanonicalForm) -> List[Letter]:
    letters = []
    for j, exponents in enumerate(form.exponents, start=1):
        for gen, a in zip(spec.graded(j), exponents):
            sign = 1 if a > 0 else -1
            letters.extend([Letter(gen.name, gen.level, gen.index, sign)] * abs(a))
    return letters


# --- COMMUTATORS ---
@dataclass(frozen=True)
class CommutatorTable:
    expansions: Dict[Tuple[Letter, Letter], Tuple[Letter, ...]]
    c_comm: int


def _signed_letters(spec: GroupSpec) -> List[Letter]:
    letters = []
    for gen in sorted(spec.generators.values(), key=lambda g: (g.level, g.index)):
        letters.append(Letter(gen.name, gen.level, gen.index, 1))
        letters.append(Letter(gen.name, gen.level, gen.index, -1))
    return letters


def _build_commutator_table(spec: GroupSpec) -> CommutatorTable:
    expansions = {}
    letters = _signed_letters(spec)
    for b in letters:
        for a in letters:
            if b.key <= a.key:
                continue
            comm = letter_element(spec, b).inverse().commutator(letter_element(spec, a).inverse())
            expansions[(b, a)] = tuple(canonical_letters(spec, peel_canonical(spec, comm)))
    c_comm = max((len(expansion) for expansion in expansions.values()), default=0)
    return CommutatorTable(expansions, c_comm)


_TABLES: Dict[int, Tuple[GroupSpec, CommutatorTable]] = {}


def commutator_table(spec: GroupSpec) -> CommutatorTable:
    """Canonical words of [b^-1, a^-1] for every disordered signed pair (b, a); built once per spec."""
    entry = _TABLES.get(id(spec))
    if entry is not None and entry[0] is spec:
        return entry[1]
    table = _build_commutator_table(spec)
    _TABLES[id(spec)] = (spec, table)
    logger.debug("%s: commutator table with C_comm = %d", spec.name, table.c_comm)
    return table


# --- WEIGHTS ---
def weight(letters: Sequence[Letter], n: int, A: int, levels: int) -> Fraction:
    """
    sum_i wt(g_i) + sum over disordered pairs wt(g_i1) wt(g_i2), wt = A^-(j-1) n^-j.

    Computed on integers scaled by Q = A^(m-1) n^m.
    """
    if n < 1 or A < 1:
        raise PreconditionError("weight needs n >= 1 and A >= 1", n=n, A=A)
    m = max(levels, max((letter.level for letter in letters), default=1))
    scale = A * n
    q = A ** (m - 1) * n ** m
    singles = 0
    pairs = 0
    seen: Dict[Tuple[int, int], int] = {}
    for letter in letters:
        s = scale ** (m - letter.level)
        singles += s
        larger = sum(total for key, total in seen.items() if key > letter.key)
        pairs += larger * s
        seen[letter.key] = seen.get(letter.key, 0) + s
    return Fraction(singles * q + pairs, q * q)


# --- SORTING ---
def _budget(k: int, nilpotency_class: int) -> int:
    return 10 * max(k, 1) ** (nilpotency_class + 1)


def sort_normalize(
    spec: GroupSpec,
    word: Word,
    n: int = 1,
    A: Optional[int] = None,
    trace_weights: bool = True,
) -> Tuple[CanonicalForm, List[Fraction], int]:
    """
    Bubble-sort a word into canonical order.

    Scans left to right and applies the first available operation: cancel an
    adjacent inverse pair, or exchange a disordered pair b a -> a b [b^-1, a^-1].
    Returns the canonical form, the weight after each step and the step count.
    """
    table = commutator_table(spec)
    if A is None:
        A = max(4 * table.c_comm, 1)
    if trace_weights and A <= 3 * table.c_comm:
        raise PreconditionError(f"weight base A = {A} must exceed 3 * C_comm = {3 * table.c_comm}", A=A)

    m = spec.nilpotency_class
    letters = list(word.letters)
    budget = _budget(len(letters), m)
    weights = [weight(letters, n, A, m)] if trace_weights else []
    steps = 0
    i = 0
    while i < len(letters) - 1:
        left, right = letters[i], letters[i + 1]
        if left.key == right.key and left.sign != right.sign:
            del letters[i:i + 2]
        elif left.key > right.key:
            letters[i:i + 2] = [right, left, *table.expansions[(left, right)]]
        else:
            i += 1
            continue
        steps += 1
        if steps > budget:
            raise StepBudgetExceeded(f"{spec.name}: sorting '{word}' exceeded {budget} steps", budget=budget)
        if trace_weights:
            weights.append(weight(letters, n, A, m))
        i = max(i - 1, 0)

    exponents = []
    for j in range(1, m + 1):
        counts = {gen.index: 0 for gen in spec.graded(j)}
        for letter in letters:
            if letter.level == j:
                counts[letter.index] += letter.sign
        exponents.append(tuple(counts[index] for index in sorted(counts)))
    return CanonicalForm(tuple(exponents)), weights, steps


# --- LENGTH BOUNDS ---
def length_bound_check(spec: GroupSpec, record: BallRecord) -> Dict[int, List[Tuple[int, int, float]]]:
    """
    Per level j and radius n: (n, max over B_n of sum_i |a_{i,j}|, that max / n^j).

    The ratios are the empirical canonical-length constants.
    """
    m = spec.nilpotency_class
    running = [0] * m
    profile: Dict[int, List[Tuple[int, int, float]]] = {j: [] for j in range(1, m + 1)}
    position = 0
    for n in range(record.radius + 1):
        end = record.counts[n]
        for key in record.order[position:end]:
            form = peel_canonical(spec, GroupElement(record.layout, key))
            for j, exponents in enumerate(form.exponents):
                running[j] = max(running[j], sum(abs(a) for a in exponents))
        position = end
        for j in range(1, m + 1):
            ratio = running[j - 1] / n ** j if n else 0.0
            profile[j].append((n, running[j - 1], ratio))
    return profile
