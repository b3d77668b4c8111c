"""nilreg test suite."""
