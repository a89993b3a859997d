"""Exception types shared across the package."""


class RppgError(Exception):
    """Base class for all library errors."""


class FormatError(RppgError, ValueError):
    """A file or in-memory value does not follow its declared layout."""


class DegenerateError(RppgError, ValueError):
    """Input is numerically degenerate (empty ROI, zero power, too few samples)."""


class ConvergenceError(RppgError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations
