"""Exception hierarchy for hylam."""


class HylamError(Exception):
    """Base class for every error raised by hylam."""


class LawError(HylamError):
    """A loading profile or separable pair violates its invariants."""


class MaterialError(HylamError):
    """A modulus or dissipation is not admissible (e.g. E <= 0)."""


class InvalidBound(HylamError):
    """A box constraint or history ordering is violated."""


class IncompatibleData(HylamError):
    """Initial data incompatible with the boundary values or the damage box."""


class NonConvergence(HylamError):
    """Iteration budget exhausted before the tolerances were met."""


class OracleError(HylamError):
    """Brute-force oracle asked to handle too many free coordinates."""


class InvariantViolation(HylamError):
    """An exact run-time assertion (irreversibility, ordering) failed."""


class ConfigError(HylamError):
    """Configuration validation failed.

    Attributes:
        errors (list): every validation message, each prefixed with the
            ``section.key`` path it refers to.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid configuration")
