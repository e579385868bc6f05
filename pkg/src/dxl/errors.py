"""Exception hierarchy shared by every module of the package."""


class DXLError(Exception):
    """Base class for all errors raised by :mod:`dxl`."""


class DomainError(DXLError, ValueError):
    """An input lies outside the domain of the requested operation."""


class DimensionError(DXLError, ValueError):
    """Matrix or profile dimensions do not agree."""


class NumericError(DXLError, ArithmeticError):
    """A numerical kernel failed (eigensolver, inversion, overflow)."""


class ContractError(DXLError, RuntimeError):
    """A caller violated a protocol precondition (e.g. updating an idle agent)."""


class ConfigError(DXLError, ValueError):
    """A scenario or problem configuration is invalid."""


class NonConvergenceError(DXLError, RuntimeError):
    """An iterative routine hit its iteration cap before its tolerance."""
