"""Exception hierarchy shared by all modules."""


class TruncRegError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TruncRegError):
    """Bad user input: invalid spec, geometry or config field."""


class InvalidSpec(ConfigError):
    pass


class InvalidGeometry(ConfigError):
    pass


class EmptyWindow(ConfigError):
    pass


class NotNested(ConfigError):
    pass


class DimMismatch(ConfigError):
    pass


class CutoffAboveNyquist(ConfigError):
    pass


class TooLarge(ConfigError):
    pass


class NumericalError(TruncRegError):
    """A numerical kernel failed to deliver its accuracy contract."""


class NonConvergence(NumericalError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"CG did not converge: relative residual {residual:.3e} "
            f"after {iterations} iterations"
        )


class SingularOperator(NumericalError):
    pass


class SubstepLimit(NumericalError):
    pass


class NonFiniteBreakdown(NumericalError):
    pass


class IllConditionedMoments(NumericalError):
    pass


class InsufficientRange(NumericalError):
    pass


class DegenerateFit(NumericalError):
    pass
