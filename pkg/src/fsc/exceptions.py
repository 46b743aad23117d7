"""Exception hierarchy shared by all fsc modules."""


class FscError(Exception):
    """Base class for all errors raised by this package."""


class InputError(FscError, ValueError):
    """Malformed input: dimension mismatch, NaN values, invalid ranges."""


class SingularCovarianceError(FscError):
    """Covariance could not be factorized even after ridge regularization."""


class DegenerateComponentError(FscError):
    """A mixture component lost all effective weight during an M-step."""

    def __init__(self, component: int, weight: float):
        self.component = component
        self.weight = weight
        super().__init__(
            f"component {component} has effective weight {weight:.3e} < 1e-10"
        )


class InsufficientLabelsError(FscError):
    """Labelled data cannot support the requested supervised fit."""


class InitializationError(FscError):
    """k-means initialization could not produce the requested components."""


class StrategyUnavailableError(FscError):
    """A weight-selection strategy could not be evaluated (anchor fit failed)."""


class DegenerateMaskError(FscError):
    """A label mask left some class with zero labelled observations."""

    def __init__(self, missing: list[int]):
        self.missing = missing
        super().__init__(f"classes {missing} received zero labelled rows")


class ParseError(FscError):
    """A data file could not be parsed (missing or non-numeric value)."""


class SchemaError(FscError):
    """Dataset schema references unknown or conflicting columns."""
