"""Exception types shared across modules (and mapped to CLI exit codes)."""


class DataFormatError(Exception):
    """A file on disk violates its declared format (parse/consistency errors)."""


class NumericError(Exception):
    """A computation produced numerically unacceptable results (NaN loss,
    failed gradient check, streaming/batch divergence)."""
