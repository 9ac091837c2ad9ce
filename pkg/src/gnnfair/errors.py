"""Exception types raised across the package."""


class GnnFairError(ValueError):
    """Base class for all errors raised by gnnfair."""


class EmptyGraph(GnnFairError):
    pass


class DegenerateClass(GnnFairError):
    pass


class ParseError(GnnFairError):
    pass


class MissingColumn(GnnFairError):
    pass


class InfeasibleSpec(GnnFairError):
    pass


class InvalidK(GnnFairError):
    pass


class EmptyGroup(GnnFairError):
    pass


class TooManyQuantiles(GnnFairError):
    pass


class NoPositives(GnnFairError):
    pass


class SingleClass(GnnFairError):
    pass


class DimensionMismatch(GnnFairError):
    pass


class ConvergenceFailure(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message if residual is None else f"{message} (residual norm {residual:.3e})")
        self.residual = residual


class NonFiniteLoss(RuntimeError):
    def __init__(self, epoch, value):
        super().__init__(f"non-finite training loss {value!r} at epoch {epoch}")
        self.epoch = epoch
        self.value = value
