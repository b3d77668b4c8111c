"""JSON result schemas, written independently of nilreg.models."""
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class VerdictEnum(str, Enum):
    """Fitted-exponent verdict."""
    MATCH = "MATCH"
    MISMATCH = "MISMATCH"


class GrowthOutput(BaseModel):
    """Output of `nilreg growth`."""
    group: str
    kind: str
    subgroup: Optional[str] = None
    degree: int = Field(ge=0)
    fitted: float
    window: Tuple[int, int]
    residual: float = Field(ge=0)
    tolerance: float = Field(gt=0)
    verdict: VerdictEnum


class ElementCritOutput(BaseModel):
    """Per central element entry of a crit result."""
    central: str
    min_degree: Optional[int] = None
    value: str
    attained_by: Optional[str] = None
    witnesses_considered: List[str] = Field(min_length=1)


class CritOutput(BaseModel):
    """Output of `nilreg crit`."""
    group: str
    value: str
    per_element: List[ElementCritOutput] = Field(min_length=1)
    interval_values: Dict[str, str]
    cyclic_center: bool
    attained: bool
    provenance: str


class CanonOutput(BaseModel):
    """Output of `nilreg canon`."""
    group: str
    word: str
    exponents: List[List[int]]
    steps: int = Field(ge=0)
    weights: List[str]
    agrees_with_peel: bool


class CheckOutput(BaseModel):
    """One verification clause."""
    name: str
    passed: bool
    detail: str = ""


class VerificationOutput(BaseModel):
    """Output of `nilreg verify-spec` and `nilreg verify-witness`."""
    subject: str
    checks: List[CheckOutput] = Field(min_length=1)
