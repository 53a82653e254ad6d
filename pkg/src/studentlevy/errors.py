"""Exception hierarchy shared by the estimation pipeline."""


class StudentLevyError(Exception):
    """Base class for errors raised by this package."""


class DomainError(StudentLevyError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class TruncationError(StudentLevyError):
    """The characteristic function has not decayed at the truncation bound."""


class MassError(StudentLevyError):
    """A density table does not integrate to the probability it should."""


class IdentifiabilityError(StudentLevyError):
    """The covariate information matrix is numerically singular."""


class NonConvergence(StudentLevyError):
    """An optimizer stopped before meeting its convergence criterion."""


class ConfigError(StudentLevyError, ValueError):
    """A run configuration failed validation.

    ``problems`` holds every problem found, not just the first one.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
