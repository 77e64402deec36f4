"""Exception hierarchy shared by every module of the package."""


class CFunHDDCError(Exception):
    """Base class for all errors raised by cfunhddc.

    ``module`` names the pipeline stage that failed; a class default can be
    overridden per instance.
    """

    module = "cfunhddc"

    def __init__(self, message="", *, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module


class InvalidBasisError(CFunHDDCError, ValueError):
    module = "funbasis"


class InvalidDomainError(CFunHDDCError, ValueError):
    module = "funbasis"


class SmoothingError(CFunHDDCError, ValueError):
    module = "funbasis"

    def __init__(self, message, curve=None, component=None, **kw):
        super().__init__(message, **kw)
        self.curve = curve
        self.component = component


class NumericalError(CFunHDDCError, ArithmeticError):
    module = "numeric"


class SpecError(CFunHDDCError, ValueError):
    module = "simulate"


class ConfigError(CFunHDDCError, ValueError):
    module = "init"


class DegenerateClusterError(CFunHDDCError):
    """A cluster lost too much mass to support its subspace; the restart fails."""

    module = "ecm"

    def __init__(self, message, cluster=None, mass=None, **kw):
        super().__init__(message, **kw)
        self.cluster = cluster
        self.mass = mass


class SelectionError(CFunHDDCError):
    module = "selection"


class MetricError(CFunHDDCError, ValueError):
    module = "metrics"


class IngestionError(CFunHDDCError, ValueError):
    module = "cli"

    def __init__(self, message, row=None, **kw):
        super().__init__(message, **kw)
        self.row = row
