"""Exception types shared across the engines, the service and the CLI."""


class FloquetGHZError(Exception):
    """Base class for all package errors."""


class ConfigError(FloquetGHZError, ValueError):
    """Invalid parameters or configuration."""


class CapacityError(FloquetGHZError):
    """Requested system size exceeds an engine cap."""


class UnsupportedGeometryError(ConfigError):
    """Operation needs translational symmetry but the lattice has open boundaries."""


class NotFoundError(FloquetGHZError):
    """A search (e.g. the tau_s threshold scan) did not find a solution.

    ``payload`` carries whatever partial result the search produced so that
    callers can still persist it.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload
