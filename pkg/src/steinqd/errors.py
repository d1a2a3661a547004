"""Exception types shared across the package."""


class SteinQDError(Exception):
    """Base class for all package errors."""


class ShapeError(SteinQDError):
    """Array shapes incompatible with the requested operation."""


class DomainError(SteinQDError):
    """Argument outside the mathematical domain of an operation."""


class ContractError(SteinQDError):
    """A caller violated an interface precondition."""


class NumericError(SteinQDError):
    """Non-finite or otherwise invalid numeric state was produced."""


class ConfigError(SteinQDError):
    """Invalid run configuration; message carries field-level detail."""


class SupportViolationError(SteinQDError):
    """Denominator measure vanishes where the numerator does not.

    Carries the offending (state, action) cells in ``cells``.
    """

    def __init__(self, cells):
        self.cells = list(cells)
        super().__init__(f"denominator is zero on cells with positive numerator mass: {self.cells}")
