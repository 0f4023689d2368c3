"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all trunkweave errors."""


class InvalidInputError(ToolkitError):
    """Degenerate or malformed input (too few vertices, zero-length edge,
    self-intersection, bad resolution, unreadable file)."""


class GenericityError(ToolkitError):
    """An operation required a generic curve (distinct vertex heights, no
    horizontal edges) and got a non-generic one."""


class RegularValueError(ToolkitError):
    """A query height or fiber angle coincides with a critical value."""


class ConstructionError(ToolkitError):
    """A geometric construction (tube, satellite, connected sum) could not
    be completed with the given parameters."""


class NumericalError(ToolkitError):
    """A numeric predicate stayed ambiguous after the deterministic retry
    ladder was exhausted."""
