"""Pydantic schemas for validating nilreg command outputs."""
from tests.schemas.results import (
    VerdictEnum,
    GrowthOutput,
    ElementCritOutput,
    CritOutput,
    CanonOutput,
    CheckOutput,
    VerificationOutput,
)
from tests.schemas.manifest import ManifestOutput, SummaryOutput
from tests.schemas.tables import BallRow, ProcessRow, HolderRow

__all__ = [
    "VerdictEnum",
    "GrowthOutput",
    "ElementCritOutput",
    "CritOutput",
    "CanonOutput",
    "CheckOutput",
    "VerificationOutput",
    "ManifestOutput",
    "SummaryOutput",
    "BallRow",
    "ProcessRow",
    "HolderRow",
]
