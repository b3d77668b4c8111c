"""
Pytest fixtures for the nilreg test suite.

Balls and realizations are expensive, so the shared ones are session scoped.
"""
import json
import math

import pytest

from nilreg.catalog import DEFAULT_CATALOG, get_catalog
from nilreg.config import Settings
from nilreg.realize import build_system
from nilreg.wordmetric import ball, schreier_ball


# =============================================================================
# CATALOG
# =============================================================================

@pytest.fixture(scope="session")
def catalog():
    """The shipped catalog, loaded and validated once."""
    return get_catalog()


@pytest.fixture(scope="session")
def raw_catalog():
    """The shipped catalog as parsed JSON; tests deep-copy it before editing."""
    return json.loads(DEFAULT_CATALOG.read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def n3(catalog):
    """Discrete Heisenberg group with fset {a, b}."""
    return catalog.group("N3")


@pytest.fixture(scope="session")
def n4(catalog):
    """4x4 unitriangular group, nilpotency class 3."""
    return catalog.group("N4")


@pytest.fixture
def settings():
    """Default settings; function scoped so tests may copy and override."""
    return Settings()


# =============================================================================
# BALLS
# =============================================================================

@pytest.fixture(scope="session")
def n3_ball(n3):
    """B_8 of N3 (a few thousand elements)."""
    return ball(n3, 8)


@pytest.fixture(scope="session")
def n4_ball(n4):
    """B_6 of N4."""
    return ball(n4, 6)


@pytest.fixture(scope="session")
def n3_schreier(n3):
    """Schreier ball of N3 / K_ac up to radius 6; its cosets are b^k K_ac."""
    return schreier_ball(n3, n3.subgroup("K_ac"), 6)


# =============================================================================
# REALIZATIONS
# =============================================================================

REALIZATION_ALPHA = 0.75
REALIZATION_C0 = 1.5


@pytest.fixture(scope="session")
def n3_system(n3):
    """
    N3 realized over K_ac cosets with |v| <= 4.

    Uses the default J = ceil(max A_v), so every core part is laid out.
    """
    return build_system(n3, n3.witness("K_ac"), radius=4, alpha=REALIZATION_ALPHA, c0=REALIZATION_C0)


@pytest.fixture(scope="session")
def n3_wide_system(n3, n3_system):
    """Same realization with J = 4 ceil(max A_v), far into the outer tails."""
    jrange = 4 * math.ceil(float(n3_system.a_values.max()))
    return build_system(
        n3, n3.witness("K_ac"), radius=4, alpha=REALIZATION_ALPHA, c0=REALIZATION_C0, jrange=jrange
    )
