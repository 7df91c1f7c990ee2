"""Exception types raised across the package."""


class SoftCCError(Exception):
    pass


class DomainError(SoftCCError, ValueError):
    """Input outside the domain of a model function (non-finite, bad shape, bad sign)."""


class ConfigError(SoftCCError, ValueError):
    """Invalid robot/scenario configuration. ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class SingularTaskError(SoftCCError, ArithmeticError):
    """Task Jacobian is rank deficient under the inertia weighting."""


class IntegrationError(SoftCCError, ArithmeticError):
    """Simulation produced non-finite values."""

    def __init__(self, message: str, t: float | None = None, state=None):
        super().__init__(f"{message} (t={t})" if t is not None else message)
        self.t = t
        self.state = state


class IdentificationError(SoftCCError, ArithmeticError):
    pass
