"""Exception hierarchy shared across the package."""


class ChronobertError(Exception):
    """Base class for all errors raised deliberately by this package."""


class ValidationError(ChronobertError):
    """Input data or configuration failed validation.

    ``problems`` carries every violation found, not just the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class StoreError(ValidationError):
    """An event store violated its schema or referential-integrity rules."""


class ConfigError(ValidationError):
    """A run configuration contained unknown keys or invalid values."""


class TrainingError(ChronobertError):
    """Training produced a non-finite loss or was otherwise unable to proceed."""
