"""Exception hierarchy shared by all modules."""


class NonlocalityError(Exception):
    """Base class for every error raised by this package."""


class ShapeMismatch(NonlocalityError, ValueError):
    pass


class InvalidParameter(NonlocalityError, ValueError):
    pass


class ZeroBlock(NonlocalityError, ValueError):
    """A setting pair has no signal left after background subtraction."""


class TooLarge(NonlocalityError, ValueError):
    pass


class EmptyInput(NonlocalityError, ValueError):
    pass


class DegenerateFit(NonlocalityError, ValueError):
    pass


class SignalingInput(NonlocalityError, ValueError):
    """Raised when an operation that needs a non-signaling behavior gets a signaling one."""


class InfeasibleV(NonlocalityError, ValueError):
    pass


class LpFailure(NonlocalityError, RuntimeError):
    pass


class NonConvergence(NonlocalityError, RuntimeError):
    """An iterative solver stopped before its bounds closed.

    ``lower`` and ``upper`` are the last certified bounds; ``result`` holds
    whatever partial answer the solver had (may be ``None``).
    """

    def __init__(self, message, lower=None, upper=None, result=None):
        super().__init__(message)
        self.lower = lower
        self.upper = upper
        self.result = result


class BootstrapFailure(NonlocalityError, RuntimeError):
    pass


class ParseError(NonlocalityError, ValueError):
    pass


class SchemaError(NonlocalityError, ValueError):
    pass
