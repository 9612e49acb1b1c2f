"""Exception types shared across the toolkit.

Everything derives from ValueError so callers that only care about
"bad input" can catch the stdlib type.
"""


class SidestepError(ValueError):
    """Base class for all toolkit errors."""


class DegreeCapError(SidestepError):
    """A symbolic polynomial exceeded the degree cap."""


class EmptyTailError(SidestepError):
    """A tail window selected no indices."""


class DuplicateBaseError(SidestepError):
    """A base set contained two elements closer than the merge tolerance."""


class WindowTooShortError(SidestepError):
    """A sequence window is shorter than an operator needs."""


class BaseNotCoveredError(SidestepError):
    """A polyexponential base is missing from the annihilator's base set."""


class NonSymmetricError(SidestepError):
    """A matrix expected to be symmetric is not, beyond tolerance."""


class DimensionMismatchError(SidestepError):
    """Spectrum samples of different dimensions were mixed."""


class UnpairedNonrealError(SidestepError):
    """Nonreal eigenvalues failed the conjugate-pairing check."""


class SpectralRangeError(SidestepError):
    """An eigenvalue lies outside the admissible range for a map."""


class ProbabilityError(SidestepError):
    """A configured event probability falls outside [0, 1]."""


class MultisetDifferenceError(SidestepError):
    """Base eigenvalues could not be matched inside the lift spectrum."""


class IllConditionedError(SidestepError):
    """The expansion fit system is too ill-conditioned to trust."""

    def __init__(self, message: str, condition: float, diagnostics: dict | None = None):
        super().__init__(message)
        self.condition = condition
        self.diagnostics = diagnostics or {}


class ParameterError(SidestepError):
    """Parameter formulas were called with out-of-range arguments."""


class PreconditionError(SidestepError):
    """A certification routine was called with invalid parameters."""


class ConfigError(SidestepError):
    """An experiment config failed schema validation."""

    def __init__(self, message: str, field: str = ""):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class MissingInputError(SidestepError):
    """An analyze/certify step ran before the run outputs it needs exist."""
