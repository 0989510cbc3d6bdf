# app/core/exceptions.py
"""Domain errors and their CLI exit codes"""
from typing import Any, Dict, Optional


class GapEdgeError(Exception):
    """Base class; `code` doubles as the process exit code"""

    code: int = 3
    kind: str = "GapEdgeError"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = dict(details or {})

    def __reduce__(self):
        return self.__class__, (self.message, self.details)

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.kind = cls.__name__

    def as_line(self) -> str:
        """Single machine-parsable error line"""
        text = self.message.replace('"', "'").replace("\n", " ")
        parts = [f"ERROR code={self.code}", f"kind={self.kind}", f'message="{text}"']
        parts += [f"{key}={value}" for key, value in sorted(self.details.items())]
        return " ".join(parts)


# ==========================================
# Validation failures (exit 2)
# ==========================================

class ValidationFailure(GapEdgeError):
    code = 2


class ConfigError(ValidationFailure):
    pass


class CoefficientError(ValidationFailure):
    pass


class NonPositiveP(ValidationFailure):
    pass


class GridMismatch(ValidationFailure):
    pass


class GridTooCoarse(ValidationFailure):
    pass


class MissingDerivativeChannel(ValidationFailure):
    pass


class WindowTouchesBand(ValidationFailure):
    pass


class KZero(ValidationFailure):
    pass


class DegenerateEdge(ValidationFailure):
    pass


# ==========================================
# Numerical failures (exit 3)
# ==========================================

class NumericalFailure(GapEdgeError):
    code = 3


class StepUnderflow(NumericalFailure):
    pass


class ScanTooCoarse(NumericalFailure):
    pass


class KTooLarge(NumericalFailure):
    pass


class OnSpectrum(NumericalFailure):
    pass


class NotInvertible(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    pass


class NonDecaying(NumericalFailure):
    pass


# ==========================================
# Verification (exit 4)
# ==========================================

class ComparisonFailure(GapEdgeError):
    code = 4
