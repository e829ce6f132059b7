"""Exception types raised across holonomy_lab."""


class HolonomyLabError(Exception):
    """Base class for all library errors."""


class DomainError(HolonomyLabError, ValueError):
    """An argument lies outside the domain of an operation."""


class DegeneracyError(HolonomyLabError, ValueError):
    """A torus vector is not generic enough for a root decomposition."""


class BranchError(HolonomyLabError, ValueError):
    """A group element sits on the branch cut of the matrix logarithm."""


class TruncationError(HolonomyLabError, RuntimeError):
    """A truncated loop basis is too small for a reliable linear solve."""


class ConstantSpeedError(HolonomyLabError, ValueError):
    """A base loop does not have the constant speed it claims."""


class ConfigError(HolonomyLabError, ValueError):
    """A verification config could not be parsed or is inconsistent."""
