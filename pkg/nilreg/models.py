"""
Pydantic models for nilreg.

These define the catalog schema, the reports every command emits and the
manifest written next to each output. Floats serialize to JSON as decimal
strings with explicit precision so outputs stay byte-stable.
"""
from enum import Enum
from fractions import Fraction
from typing import Annotated, Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PlainSerializer, field_validator, model_validator


def fmt_float(value: float) -> str:
    return f"{float(value):.12g}"


def fmt_fraction(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


DecimalFloat = Annotated[float, PlainSerializer(fmt_float, return_type=str, when_used="json")]

# (factor, row, col), all 1-based
Position = Tuple[int, int, int]
# (factor, row, col, coefficient)
Term = Tuple[int, int, int, int]


# --- ENUMS ---
class Verdict(str, Enum):
    MATCH = "MATCH"
    MISMATCH = "MISMATCH"


class CountKind(str, Enum):
    BALL = "ball"
    RELATIVE = "relative"
    SCHREIER = "schreier"


class ProcessVariant(str, Enum):
    PLAIN = "plain"
    RIGHT = "right"
    CRITICAL = "critical"


# --- NESTED MODELS ---
class ErrorDetails(BaseModel):
    error_code: str
    error_message: str
    context: Dict[str, str] = Field(default_factory=dict)


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


# --- CATALOG MODELS ---
class GeneratorModel(BaseModel):
    """A graded generator f_{index,level}, given as one matrix per factor."""
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    level: int = Field(..., ge=1)
    index: int = Field(..., ge=1)
    matrices: List[List[List[int]]] = Field(..., min_length=1)


class ElementModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    word: str


class LevelModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    level: int = Field(..., ge=1)
    vanish: List[Position] = Field(default_factory=list)
    rank: int = Field(..., ge=0)
    torsion: int = 0
    projection: List[List[Term]] = Field(default_factory=list)

    @field_validator("torsion")
    @classmethod
    def torsion_must_vanish(cls, value: int) -> int:
        if value != 0:
            raise ValueError("torsion quotients are not supported; declare torsion = 0")
        return value

    @model_validator(mode="after")
    def projection_matches_rank(self) -> "LevelModel":
        if len(self.projection) != self.rank:
            raise ValueError(
                f"level {self.level}: {len(self.projection)} projection functionals for rank {self.rank}"
            )
        return self


class ChainStepModel(BaseModel):
    """One Z step K_i -> K_{i+1}: lambda_i on K_i with kernel K_{i+1}, lambda_i(transversal) = 1."""
    model_config = ConfigDict(extra="forbid")

    subgroup: str
    functional: List[Term] = Field(..., min_length=1)
    transversal: str


class SubgroupModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    description: str = ""
    vanish: List[Position] = Field(default_factory=list)
    functional_zero: List[List[Term]] = Field(default_factory=list)
    generators: List[str] = Field(default_factory=list)
    levels: Optional[Dict[int, List[str]]] = None
    chain: Optional[List[ChainStepModel]] = None
    center_join: Optional[str] = None


class WitnessModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    central: str
    stabilizer: str
    kernel: str
    mu: List[Term] = Field(..., min_length=1)
    abelian_quotient: Optional[str] = None
    rationale: str = ""


class CentralCandidateModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    element: str
    witnesses: List[str] = Field(default_factory=list)
    rationale: str = ""


class GroupModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = Field(..., min_length=1)
    description: str = ""
    factors: List[int] = Field(..., min_length=1)
    abelian: bool
    center_rank: int = Field(..., ge=1)
    generators: List[GeneratorModel] = Field(..., min_length=1)
    fset: List[str] = Field(..., min_length=1)
    levels: List[LevelModel] = Field(..., min_length=1)
    elements: List[ElementModel] = Field(default_factory=list)
    subgroups: List[SubgroupModel] = Field(default_factory=list)
    witnesses: List[WitnessModel] = Field(default_factory=list)
    central_candidates: List[CentralCandidateModel] = Field(default_factory=list)
    abelian_candidates: List[str] = Field(default_factory=list)

    @field_validator("factors")
    @classmethod
    def factor_dimensions(cls, value: List[int]) -> List[int]:
        if any(n < 2 for n in value):
            raise ValueError("every factor must have dimension >= 2")
        return value


class CatalogModel(BaseModel):
    version: str
    groups: List[GroupModel] = Field(..., min_length=1)


# --- REPORT MODELS ---
class VerificationReport(BaseModel):
    subject: str
    checks: List[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]


class GrowthReport(BaseModel):
    group: str
    kind: CountKind
    subgroup: Optional[str] = None
    degree: int
    fitted: DecimalFloat
    window: Tuple[int, int]
    residual: DecimalFloat
    tolerance: DecimalFloat
    verdict: Verdict

    @model_validator(mode="after")
    def window_nonempty(self) -> "GrowthReport":
        if self.window[0] >= self.window[1]:
            raise ValueError(f"empty fit window {self.window}")
        return self


class CanonReport(BaseModel):
    group: str
    word: str
    exponents: List[List[int]]
    steps: int
    weights: List[str] = Field(default_factory=list)
    agrees_with_peel: bool


class ElementCrit(BaseModel):
    central: str
    min_degree: Optional[int] = None
    value: str
    attained_by: Optional[str] = None
    witnesses_considered: List[str] = Field(default_factory=list)


class CritResult(BaseModel):
    group: str
    value: str
    per_element: List[ElementCrit]
    interval_values: Dict[str, str]
    cyclic_center: bool
    attained: bool = False
    provenance: str = "over declared candidates"

    def as_fraction(self) -> Fraction:
        return Fraction(self.value)


class CriticalConstants(BaseModel):
    c1: DecimalFloat = Field(..., gt=0)
    c2: DecimalFloat = Field(..., gt=0)
    d: int = Field(..., ge=1)
    calibration_steps: int
    calibration_seeds: int
    calibrated: bool = True


class ProcessSummary(BaseModel):
    group: str
    variant: ProcessVariant
    steps: int
    seeds: List[int]
    retries_used: Optional[int] = None
    constants: Optional[CriticalConstants] = None


class AcceptanceReport(BaseModel):
    criterion: str
    passed: bool
    checks: List[CheckResult]
    runtime_seconds: DecimalFloat


class RunManifest(BaseModel):
    command: str
    config: Dict[str, Any]
    catalog_hash: str
    seeds: List[int] = Field(default_factory=list)
    tool_version: str
    wall_clock_budget: Optional[DecimalFloat] = None
    wall_clock_seconds: DecimalFloat = 0.0
    outputs: List[str] = Field(default_factory=list)
    partial: bool = False


# --- REALIZATION PAYLOADS ---
class CosetPayload(BaseModel):
    key: List[int]
    norm: int = Field(..., ge=0)
    a_value: float = Field(..., ge=1.0)


class SystemPayload(BaseModel):
    """Persisted layout of an interval system; lengths are recomputed from A_v."""
    group: str
    witness: str
    alpha: float = Field(..., gt=0, lt=1)
    epsilon: float = Field(..., gt=0, lt=1)
    c0: float = Field(..., gt=1)
    radius: int = Field(..., ge=0)
    jrange: int = Field(..., ge=1)
    p_c: int
    cosets: List[CosetPayload] = Field(..., min_length=1)
    letters: List[str]
    moves: Dict[str, List[Tuple[int, int]]]
    metadata: Dict[str, Any] = Field(default_factory=dict)
