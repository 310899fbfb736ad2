"""Exception hierarchy shared across the package."""


class PKBError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PKBError):
    """Malformed, inconsistent, or degenerate input data."""


class SchemaError(DataError):
    """Input files or frames that do not match the expected layout."""


class OutcomeTypeMismatch(SchemaError):
    """Outcome file columns conflict with the declared outcome type."""


class NumericError(PKBError):
    """Numerical failure: non-finite values, ill-conditioning, non-convergence."""
