"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Degenerate geometric input (parallel lines, coincident points, ...)."""


class GenericityError(GeometryError):
    """Configuration violates the genericity assumptions (non-skew quad, collinear star)."""


class SolverError(RuntimeError):
    """A lattice evolution hit a singular step or produced inconsistent data."""


class ConfigError(ValueError):
    """Malformed run configuration or artifact file."""
