"""The exceptions used by AIODeconv."""

from __future__ import annotations

from typing import Any


class DeconvException(Exception):
    """Class to throw general deconvolution exception."""

    def __str__(self) -> str:
        """Render (code, message) tuples from the errors helper."""
        parts: list[str] = []
        for arg in self.args:
            if (
                isinstance(arg, tuple)
                and len(arg) == 2
                and isinstance(arg[0], int)
                and isinstance(arg[1], str)
            ):
                parts.append(f"[{arg[0]}] {arg[1]}")
            else:
                parts.append(str(arg))
        return ": ".join(parts)


class DeconvDataException(DeconvException):
    """Class to throw malformed or inconsistent data exception."""


class DeconvEmptyBasisException(DeconvDataException):
    """Class to throw exception when every gene has been filtered out."""


class DeconvUsageException(DeconvException):
    """Class to throw invalid configuration or usage exception."""


class DeconvSolverException(DeconvException):
    """Class to throw solver failure exception.

    The best iterate reached before the failure is kept on the exception.
    """

    def __init__(
        self, *args: Any, best: Any = None, iterations: int = 0
    ) -> None:
        """Keep the best iterate and iteration count."""
        super().__init__(*args)
        self.best = best
        self.iterations = iterations


class DeconvIllConditionedException(DeconvSolverException):
    """Class to throw singular normal equations exception."""

    def __init__(self, *args: Any, condition: float = float("inf")) -> None:
        """Keep the condition estimate."""
        super().__init__(*args)
        self.condition = condition


class DeconvDegenerateException(DeconvSolverException):
    """Class to throw degenerate (zero-sum or all-negative) solution exception."""


class DeconvUndefinedCorrelationException(DeconvException):
    """Class to throw undefined correlation exception."""
