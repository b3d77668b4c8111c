"""
Catalog loading.

The shipped catalog is nilreg/data/catalog.json. It is validated with the
pydantic models in nilreg.models and then turned into GroupSpec objects.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import ValidationError

from nilreg.critreg import StabilizerWitness
from nilreg.errors import CatalogInconsistencyError, CatalogLookupError, NilregError
from nilreg.group_core import (
    CentralCandidate,
    ChainStep,
    GradedGenerator,
    GroupElement,
    GroupSpec,
    LevelData,
    LinearFunctional,
    Predicate,
    SubgroupSpec,
    get_layout,
    parse_word,
)
from nilreg.models import CatalogModel, GroupModel, SubgroupModel

logger = logging.getLogger(__name__)

DEFAULT_CATALOG = Path(__file__).parent / "data" / "catalog.json"


@dataclass
class Catalog:
    groups: Dict[str, GroupSpec]
    content_hash: str
    path: str

    def group(self, name: str) -> GroupSpec:
        if name not in self.groups:
            raise CatalogLookupError(f"unknown group '{name}'", available=sorted(self.groups))
        return self.groups[name]

    def names(self) -> List[str]:
        return list(self.groups)


def _functional(terms) -> LinearFunctional:
    return LinearFunctional(tuple(tuple(int(x) for x in term) for term in terms))


def _predicate(vanish, functional_zero=()) -> Predicate:
    return Predicate(
        vanish=tuple(tuple(int(x) for x in pos) for pos in vanish),
        functionals=tuple(_functional(terms) for terms in functional_zero),
    )


def _build_subgroup(spec: GroupSpec, model: SubgroupModel) -> SubgroupSpec:
    generators = tuple(parse_word(spec, word) for word in model.generators)
    level_generators = None
    if model.levels is not None:
        level_generators = {
            int(j): tuple(parse_word(spec, word) for word in words) for j, words in model.levels.items()
        }
        for j in range(1, spec.nilpotency_class + 1):
            level_generators.setdefault(j, ())
    chain = None
    if model.chain is not None:
        chain = tuple(
            ChainStep(
                subgroup=step.subgroup,
                functional=_functional(step.functional),
                transversal_name=step.transversal,
                transversal=parse_word(spec, step.transversal),
            )
            for step in model.chain
        )
    return SubgroupSpec(
        name=model.name,
        predicate=_predicate(model.vanish, model.functional_zero),
        generators=generators,
        generator_words=tuple(model.generators),
        level_generators=level_generators,
        chain=chain,
        center_join=model.center_join,
        description=model.description,
    )


def build_group(model: GroupModel) -> GroupSpec:
    """Turn one validated catalog entry into a GroupSpec."""
    dims = tuple(model.factors)
    layout = get_layout(dims)

    generators: Dict[str, GradedGenerator] = {}
    for gen in model.generators:
        if gen.name in generators:
            raise CatalogInconsistencyError(f"{model.name}: duplicate generator {gen.name}")
        element = GroupElement.from_matrices(layout, gen.matrices)
        generators[gen.name] = GradedGenerator(gen.name, gen.level, gen.index, element)

    levels = sorted(model.levels, key=lambda level: level.level)
    if [level.level for level in levels] != list(range(1, len(levels) + 1)):
        raise CatalogInconsistencyError(f"{model.name}: levels must be numbered 1..m")
    level_data = tuple(
        LevelData(
            level=level.level,
            predicate=_predicate(level.vanish),
            rank=level.rank,
            projection=tuple(_functional(terms) for terms in level.projection),
        )
        for level in levels
    )

    spec = GroupSpec(
        name=model.name,
        dims=dims,
        abelian=model.abelian,
        center_rank=model.center_rank,
        generators=generators,
        fset=tuple(model.fset),
        levels=level_data,
        abelian_candidates=tuple(model.abelian_candidates),
        description=model.description,
        source=model.model_dump(mode="json"),
    )

    for element in model.elements:
        spec.elements[element.name] = parse_word(spec, element.word)
    for sub in model.subgroups:
        spec.subgroups[sub.name] = _build_subgroup(spec, sub)

    for sub in spec.subgroups.values():
        for step in sub.chain or ():
            spec.subgroup(step.subgroup)
        if sub.center_join is not None:
            spec.subgroup(sub.center_join)

    for w in model.witnesses:
        stabilizer = spec.subgroup(w.stabilizer)
        spec.witnesses[w.name] = StabilizerWitness(
            name=w.name,
            central_name=w.central,
            central=spec.element(w.central),
            stabilizer=stabilizer,
            kernel=spec.subgroup(w.kernel),
            mu=_functional(w.mu),
            chain=stabilizer.chain or (),
            abelian_quotient=w.abelian_quotient,
            rationale=w.rationale,
        )

    candidates = []
    for cand in model.central_candidates:
        for name in cand.witnesses:
            witness = spec.witness(name)
            if witness.central_name != cand.element:
                raise CatalogInconsistencyError(
                    f"{model.name}: witness {name} is for {witness.central_name}, not {cand.element}"
                )
        candidates.append(CentralCandidate(
            element_name=cand.element,
            element=spec.element(cand.element),
            witnesses=tuple(cand.witnesses),
            rationale=cand.rationale,
        ))
    spec.central_candidates = tuple(candidates)
    for name in spec.abelian_candidates:
        spec.subgroup(name)
    return spec


def load_catalog(path: Optional[Union[str, Path]] = None) -> Catalog:
    """Load and validate a catalog file; pydantic errors become CatalogInconsistencyError."""
    catalog_path = Path(path) if path else DEFAULT_CATALOG
    if not catalog_path.is_file():
        raise CatalogLookupError(f"catalog file not found: {catalog_path}", path=catalog_path)
    raw = catalog_path.read_bytes()
    try:
        payload = json.loads(raw)
        model = CatalogModel(**payload)
    except (ValidationError, json.JSONDecodeError) as exc:
        raise CatalogInconsistencyError(f"invalid catalog {catalog_path}: {exc}", path=catalog_path) from exc

    groups: Dict[str, GroupSpec] = {}
    for entry in model.groups:
        if entry.name in groups:
            raise CatalogInconsistencyError(f"duplicate group {entry.name}", path=catalog_path)
        try:
            groups[entry.name] = build_group(entry)
        except CatalogInconsistencyError:
            raise
        except NilregError as exc:
            raise CatalogInconsistencyError(f"{entry.name}: {exc.message}", group=entry.name) from exc
    digest = hashlib.sha256(raw).hexdigest()
    logger.debug("loaded %d groups from %s (sha256 %s)", len(groups), catalog_path, digest[:12])
    return Catalog(groups=groups, content_hash=digest, path=str(catalog_path))


@lru_cache(maxsize=4)
def _default_catalog() -> Catalog:
    return load_catalog()


def get_catalog(path: Optional[Union[str, Path]] = None) -> Catalog:
    return load_catalog(path) if path else _default_catalog()


def get_group(name: str, path: Optional[Union[str, Path]] = None) -> GroupSpec:
    return get_catalog(path).group(name)
