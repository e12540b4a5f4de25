"""Exception hierarchy. The CLI maps each family to an exit code."""


class CsgmError(Exception):
    """Base class; ``stage`` names the pipeline step that failed, if known."""

    def __init__(self, message: str, stage: str | None = None):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if stage else message)


class DataError(CsgmError):
    """Malformed, missing or inconsistent input data."""


class NumericalError(CsgmError):
    """A numerical procedure could not produce a valid result."""


class DegenerateComponentError(NumericalError):
    """A mixture component lost (almost) all of its responsibility mass."""
