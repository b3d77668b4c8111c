"""
Word-metric balls, relative counts and Schreier balls.

Cayley edges are left multiplications g -> f.g by letters of the metric
generating set (e, the fset generators, their inverses). BFS layers are
expanded letter by letter and merged in a fixed order, so the store and the
discovery order do not depend on the worker count.
"""
import hashlib
import json
import logging
import pickle
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from nilreg.config import Settings
from nilreg.errors import (
    BallBudgetExceeded,
    CosetBudgetExceeded,
    NotInBallError,
    PreconditionError,
)
from nilreg.group_core import (
    Entries,
    GroupElement,
    GroupSpec,
    SubgroupSpec,
    coset_canonicalizer,
    get_layout,
    project,
)

logger = logging.getLogger(__name__)

# parent letter index recorded for the identity
NO_PARENT = -1


# --- BALLS ---
@dataclass
class BallRecord:
    group: str
    dims: Tuple[int, ...]
    letter_names: Tuple[str, ...]
    letter_entries: Tuple[Entries, ...]
    radius: int
    counts: List[int]
    order: List[Entries]
    store: Dict[Entries, Tuple[int, int]]

    @property
    def layout(self):
        return get_layout(self.dims)

    def __contains__(self, g: GroupElement) -> bool:
        return g.entries in self.store

    def distance(self, g: GroupElement) -> int:
        if g.entries not in self.store:
            raise NotInBallError(f"{g} is not in the radius-{self.radius} ball of {self.group}")
        return self.store[g.entries][0]

    def element_at(self, index: int) -> GroupElement:
        return GroupElement(self.layout, self.order[index])

    def truncated(self, radius: int) -> "BallRecord":
        """The prefix of this record up to a smaller radius."""
        if radius > self.radius:
            raise PreconditionError(f"cannot truncate radius {self.radius} to {radius}")
        size = self.counts[radius]
        order = self.order[:size]
        return BallRecord(
            group=self.group,
            dims=self.dims,
            letter_names=self.letter_names,
            letter_entries=self.letter_entries,
            radius=radius,
            counts=self.counts[: radius + 1],
            order=order,
            store={key: self.store[key] for key in order},
        )


def _expand_chunk(dims: Tuple[int, ...], letters: Sequence[Entries], chunk: Sequence[Entries]) -> List[List[Entries]]:
    layout = get_layout(tuple(dims))
    return [[layout.multiply(letter, x) for x in chunk] for letter in letters]


def _chunks(items: List[Entries], n: int) -> List[List[Entries]]:
    size = max(1, -(-len(items) // n))
    return [items[i:i + size] for i in range(0, len(items), size)]


def ball(
    spec: GroupSpec,
    radius: int,
    settings: Optional[Settings] = None,
    cache: Optional["BallCache"] = None,
) -> BallRecord:
    """Enumerate B_n(e) for n <= radius over spec.letters()."""
    if radius < 0:
        raise PreconditionError("radius must be >= 0", radius=radius)
    settings = settings or Settings()
    if cache is not None:
        cached = cache.load(spec, radius)
        if cached is not None:
            return cached

    letters = spec.letters()
    if letters[0].name != "e" or not letters[0].element.is_identity:
        raise PreconditionError("the metric generating set must start with the identity")
    layout = spec.layout
    identity = layout.identity
    store: Dict[Entries, Tuple[int, int]] = {identity: (0, NO_PARENT)}
    order: List[Entries] = [identity]
    counts = [1]
    frontier = [identity]
    moving = [(idx, letter.element.entries) for idx, letter in enumerate(letters) if idx > 0]

    record = BallRecord(
        group=spec.name,
        dims=spec.dims,
        letter_names=tuple(letter.name for letter in letters),
        letter_entries=tuple(letter.element.entries for letter in letters),
        radius=0,
        counts=counts,
        order=order,
        store=store,
    )

    executor = ProcessPoolExecutor(max_workers=settings.workers) if settings.workers > 1 else None
    try:
        for r in range(1, radius + 1):
            letter_values = [entries for _, entries in moving]
            if executor is not None and len(frontier) > 1024:
                chunks = _chunks(frontier, settings.workers)
                results = list(executor.map(
                    _expand_chunk, [spec.dims] * len(chunks), [letter_values] * len(chunks), chunks
                ))
            else:
                results = [_expand_chunk(spec.dims, letter_values, frontier)]

            new_frontier: List[Entries] = []
            for position, (idx, _) in enumerate(moving):
                for products in results:
                    for y in products[position]:
                        if y not in store:
                            store[y] = (r, idx)
                            new_frontier.append(y)
            order.extend(new_frontier)
            counts.append(len(order))
            frontier = new_frontier

            if len(order) > settings.max_elements:
                logger.warning(
                    "%s: ball store reached %d elements at radius %d (budget %d)",
                    spec.name, len(order), r, settings.max_elements,
                )
                partial = BallRecord(
                    group=record.group, dims=record.dims, letter_names=record.letter_names,
                    letter_entries=record.letter_entries, radius=r, counts=counts, order=order, store=store,
                ).truncated(r - 1)
                raise BallBudgetExceeded(
                    f"{spec.name}: ball enumeration exceeded {settings.max_elements} elements",
                    partial=partial,
                    completed_radius=r - 1,
                )
            record.radius = r
            if r % settings.log_every == 0 or r == radius:
                logger.info("%s: radius %d, #B = %d", spec.name, r, len(order))
    finally:
        if executor is not None:
            executor.shutdown()

    if cache is not None:
        cache.save(spec, record)
    return record


def geodesic_word(record: BallRecord, g: GroupElement) -> List[int]:
    """
    Letter indices of a shortest word for g, in reading order.

    The product f_{w[0]} f_{w[1]} ... f_{w[-1]} equals g; the last letter is the
    one applied first along the BFS path.
    """
    layout = record.layout
    key = g.entries
    if key not in record.store:
        raise NotInBallError(f"{g} is not in the radius-{record.radius} ball of {record.group}")
    inverses = [layout.inverse(entries) for entries in record.letter_entries]
    word = []
    dist, parent = record.store[key]
    while dist > 0:
        word.append(parent)
        key = layout.multiply(inverses[parent], key)
        dist, parent = record.store[key]
    return word


def word_product(record: BallRecord, word: Sequence[int]) -> GroupElement:
    layout = record.layout
    result = layout.identity
    for idx in word:
        result = layout.multiply(result, record.letter_entries[idx])
    return GroupElement(layout, result)


def subball_counts(record: BallRecord, r: int) -> int:
    """#B_r; the elements of B_r are record.order[:subball_counts(record, r)]."""
    if not 0 <= r <= record.radius:
        raise PreconditionError(f"radius {r} outside the enumerated range 0..{record.radius}")
    return record.counts[r]


def relative_count(record: BallRecord, sub: SubgroupSpec) -> List[int]:
    """counts_H[n] = #(B_n ∩ H)."""
    test = sub.predicate.compile(record.layout)
    per_layer = [0] * (record.radius + 1)
    for key in record.order:
        if test(key):
            per_layer[record.store[key][0]] += 1
    counts, total = [], 0
    for value in per_layer:
        total += value
        counts.append(total)
    return counts


def inclusion_profile(spec: GroupSpec, record: BallRecord, sub: SubgroupSpec, level: int) -> List[Tuple[int, int, int]]:
    """
    Per radius n: (n, max |phi_j| over B_n ∩ H_j, m) where every multiple in [-m, m]
    of the first level-j coordinate is attained by B_n ∩ H_j.
    """
    test = sub.predicate.compile(record.layout)
    level_test = spec.level(level).predicate.compile(record.layout)
    attained = {0}
    max_abs, m = 0, 0
    profile = []
    position = 0
    for n in range(record.radius + 1):
        end = record.counts[n]
        for key in record.order[position:end]:
            if test(key) and level_test(key):
                coords = project(spec, level, GroupElement(record.layout, key))
                max_abs = max(max_abs, max((abs(x) for x in coords), default=0))
                if coords:
                    attained.add(coords[0])
        position = end
        while (m + 1) in attained and -(m + 1) in attained:
            m += 1
        profile.append((n, max_abs, m))
    return profile


# --- SCHREIER BALLS ---
@dataclass
class SchreierBall:
    group: str
    subgroup: str
    dims: Tuple[int, ...]
    radius: int
    counts: List[int]
    reps: List[Entries]
    dist: List[int]
    keys: Optional[List[Tuple[int, ...]]] = None
    index: Dict[Tuple[int, ...], int] = field(default_factory=dict)
    member: Optional[Callable[[Entries], bool]] = field(default=None, repr=False)

    @property
    def layout(self):
        return get_layout(self.dims)

    @property
    def size(self) -> int:
        return len(self.reps)

    def representative(self, v: int) -> GroupElement:
        return GroupElement(self.layout, self.reps[v])

    def norm(self, v: int) -> int:
        return self.dist[v]

    def locate(self, entries: Entries, canonical=None) -> Optional[int]:
        """Coset id of gK for g given by entries, or None outside the ball."""
        if canonical is not None:
            return self.index.get(canonical(entries))
        layout = self.layout
        inv = layout.inverse(entries)
        for v, rep in enumerate(self.reps):
            if self.member(layout.multiply(inv, rep)):
                return v
        return None


def schreier_ball(
    spec: GroupSpec,
    sub: SubgroupSpec,
    radius: int,
    settings: Optional[Settings] = None,
    use_canonicalizer: bool = True,
) -> SchreierBall:
    """
    BFS over left cosets gK with edges gK -> fgK.

    With a coset chain the store is hashed on coset coordinates; otherwise each
    candidate is compared pairwise (g1^-1 g2 in K) against the neighbouring layers.
    """
    if radius < 0:
        raise PreconditionError("radius must be >= 0", radius=radius)
    settings = settings or Settings()
    layout = spec.layout
    letters = [letter.element.entries for letter in spec.letters()[1:]]
    member = sub.predicate.compile(layout)
    canonical = coset_canonicalizer(spec, sub) if use_canonicalizer else None

    identity = layout.identity
    result = SchreierBall(
        group=spec.name, subgroup=sub.name, dims=spec.dims, radius=0, counts=[1],
        reps=[identity], dist=[0], member=member,
    )
    if canonical is not None:
        key = canonical(identity)
        result.keys = [key]
        result.index = {key: 0}

    layers: List[List[int]] = [[0]]
    for r in range(1, radius + 1):
        new_layer: List[int] = []
        for letter in letters:
            for u in layers[r - 1]:
                y = layout.multiply(letter, result.reps[u])
                if canonical is not None:
                    key = canonical(y)
                    if key in result.index:
                        continue
                    result.index[key] = len(result.reps)
                    result.keys.append(key)
                else:
                    inv = layout.inverse(y)
                    candidates = layers[r - 2] if r >= 2 else []
                    neighbours = candidates + layers[r - 1] + new_layer
                    if any(member(layout.multiply(inv, result.reps[w])) for w in neighbours):
                        continue
                    if len(new_layer) >= settings.coset_budget:
                        logger.warning("%s/%s: coset budget hit in layer %d", spec.name, sub.name, r)
                        raise CosetBudgetExceeded(
                            f"{spec.name}/{sub.name}: layer {r} exceeds {settings.coset_budget} cosets "
                            "without a canonicalizer",
                            layer=r,
                        )
                new_layer.append(len(result.reps))
                result.reps.append(y)
                result.dist.append(r)
        layers.append(new_layer)
        result.counts.append(len(result.reps))
        result.radius = r
        if r % settings.log_every == 0 or r == radius:
            logger.info("%s/%s: Schreier radius %d, %d cosets", spec.name, sub.name, r, len(result.reps))
    return result


def sandwich_violations(
    counts: Sequence[int], schreier_counts: Sequence[int], relative_counts: Sequence[int], upto: int
) -> List[str]:
    """
    Check #B_2n >= #S_n * #(B_n ∩ K) and #B_n <= #S_n * #(B_2n ∩ K) for n <= upto.
    """
    problems = []
    for n in range(upto + 1):
        if 2 * n >= len(counts) or 2 * n >= len(relative_counts):
            break
        if counts[2 * n] < schreier_counts[n] * relative_counts[n]:
            problems.append(f"lower sandwich fails at n={n}")
        if counts[n] > schreier_counts[n] * relative_counts[2 * n]:
            problems.append(f"upper sandwich fails at n={n}")
    return problems


# --- PERSISTENCE ---
class BallCache:
    """Pickled BallRecords under cache_dir, keyed by the content of (group, letters, radius)."""

    def __init__(self, cache_dir: str):
        self.root = Path(cache_dir)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(spec: GroupSpec, radius: int) -> str:
        payload = {
            "group": spec.source or spec.name,
            "letters": [letter.name for letter in spec.letters()],
            "radius": radius,
        }
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def path(self, spec: GroupSpec, radius: int) -> Path:
        return self.root / f"{spec.name}-r{radius}-{self.key(spec, radius)[:16]}.pkl"

    def load(self, spec: GroupSpec, radius: int) -> Optional[BallRecord]:
        path = self.path(spec, radius)
        if not path.is_file():
            return None
        with path.open("rb") as handle:
            key, record = pickle.load(handle)
        if key != self.key(spec, radius):
            logger.warning("ignoring stale cache file %s", path)
            return None
        logger.info("loaded %s radius %d from cache", spec.name, radius)
        return record

    def save(self, spec: GroupSpec, record: BallRecord) -> Path:
        path = self.path(spec, record.radius)
        with path.open("wb") as handle:
            pickle.dump((self.key(spec, record.radius), record), handle, protocol=pickle.HIGHEST_PROTOCOL)
        return path
