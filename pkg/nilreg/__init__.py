"""nilreg: growth, critical regularity and interval realizations of nilpotent groups."""

__version__ = "1.0.0"
