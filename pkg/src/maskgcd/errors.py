"""Typed failures shared across the engine.

Every error carries a stable machine-readable ``code`` that the CLI maps to
exit statuses (config errors vs data errors vs internal faults).
"""

from __future__ import annotations

# codes considered configuration mistakes (CLI exit 2)
CONFIG_CODES = frozenset({"CONFIG_ERROR", "PARAM_ERROR"})


class EngineError(Exception):
    code = "INTERNAL"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(EngineError):
    code = "CONFIG_ERROR"


class ParamError(EngineError):
    code = "PARAM_ERROR"


class FormatError(EngineError):
    code = "FORMAT_ERROR"


class DimensionMismatch(EngineError):
    code = "DIMENSION_MISMATCH"


class DanglingGeometry(EngineError):
    code = "DANGLING_GEOMETRY"


class SumMismatch(EngineError):
    code = "SUM_MISMATCH"


class IoError(EngineError):
    code = "IO_ERROR"


class KTooLarge(EngineError):
    code = "K_TOO_LARGE"


class IndexOutOfRange(EngineError):
    code = "INDEX_OUT_OF_RANGE"


class EmptyClass(EngineError):
    code = "EMPTY_CLASS"


class NotEnoughCandidates(EngineError):
    code = "NOT_ENOUGH_CANDIDATES"


class ShapeMismatch(EngineError):
    code = "SHAPE_MISMATCH"


class CoverageGap(EngineError):
    code = "COVERAGE_GAP"


class OverlapError(EngineError):
    code = "OVERLAP"


class StageError(EngineError):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: EngineError):
        super().__init__(f"[stage {stage}] {cause.message}")
        self.stage = stage
        self.cause = cause
        self.code = cause.code
