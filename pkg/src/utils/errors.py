"""
Exception Hierarchy
Errors raised by the geometry, lattice, discrepancy and limit-law modules
"""


class LabError(Exception):
    """Base class for every error raised by the lab"""


class DomainError(LabError, ValueError):
    """Argument outside the domain of an operation"""


class VariantMismatchError(DomainError):
    """Limit-law variant incompatible with the body or the sample point"""


class InsufficientSamplesError(DomainError):
    """Too few samples for a statistic"""


class ReductionError(LabError):
    """Lattice reduction failed (ill-conditioned or non-unimodular result)"""


class UnsupportedDimensionError(LabError, NotImplementedError):
    """Dimension not covered (e.g. flows in d=3)"""


class ConfigValidationError(LabError, ValueError):
    """Configuration file is missing required keys or has invalid values"""


class OutputSchemaError(LabError):
    """A sample dump does not match its declared schema"""
