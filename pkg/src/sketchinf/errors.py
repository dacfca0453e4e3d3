"""Exception hierarchy.

Every error carries a short machine-readable ``code`` and maps onto one of
three CLI exit codes: 2 (configuration), 3 (data), 4 (numerical).
"""

from __future__ import annotations


class SketchInfError(Exception):
    code = "E_GENERIC"
    exit_code = 1


class ConfigError(SketchInfError):
    code = "E_CONFIG"
    exit_code = 2


class DataError(SketchInfError):
    code = "E_DATA"
    exit_code = 3


class NumericalError(SketchInfError):
    code = "E_NUMERIC"
    exit_code = 4


# -- configuration -----------------------------------------------------------

class BadLevel(ConfigError):
    code = "E_BAD_LEVEL"


class SketchTooSmall(ConfigError):
    code = "E_SKETCH_TOO_SMALL"


class SketchTooLarge(ConfigError):
    code = "E_SKETCH_TOO_LARGE"


class BadSparsity(ConfigError):
    code = "E_BAD_SPARSITY"


class KurtosisTooLow(ConfigError):
    code = "E_KURTOSIS_TOO_LOW"


class ConfigInvalid(ConfigError):
    code = "E_CONFIG_INVALID"


class SchemaError(ConfigError):
    code = "E_SCHEMA"


class NeedsFullData(ConfigError):
    code = "E_NEEDS_FULL_DATA"


class UnsupportedMethod(ConfigError):
    code = "E_UNSUPPORTED_METHOD"


# -- data --------------------------------------------------------------------

class NonFinite(DataError):
    code = "E_NON_FINITE"


class BadShape(DataError):
    code = "E_BAD_SHAPE"


class LengthNotPowerOfTwo(DataError):
    code = "E_NOT_POW2"


class NotSymmetric(DataError):
    code = "E_NOT_SYMMETRIC"


class NotOrthonormal(DataError):
    code = "E_NOT_ORTHONORMAL"


class TooFewSamples(DataError):
    code = "E_TOO_FEW_SAMPLES"


class ParseError(DataError):
    code = "E_PARSE"

    def __init__(self, msg: str, row: int | None = None, col: int | None = None):
        loc = ""
        if row is not None:
            loc = f" (row {row}" + (f", column {col})" if col is not None else ")")
        super().__init__(msg + loc)
        self.row = row
        self.col = col


class RaggedRows(ParseError):
    code = "E_RAGGED_ROWS"


class NonNumericCell(ParseError):
    code = "E_NON_NUMERIC"


class IoError(DataError):
    code = "E_IO"


# -- numerical ---------------------------------------------------------------

class RankDeficient(NumericalError):
    code = "E_RANK_DEFICIENT"


class EigengapTooSmall(NumericalError):
    code = "E_EIGENGAP"


class ZeroResidual(NumericalError):
    code = "E_ZERO_RESIDUAL"


class DegenerateSignal(NumericalError):
    code = "E_DEGENERATE_SIGNAL"


class DegenerateSample(NumericalError):
    code = "E_DEGENERATE_SAMPLE"


class DegenerateDirection(NumericalError):
    code = "E_DEGENERATE_DIRECTION"
