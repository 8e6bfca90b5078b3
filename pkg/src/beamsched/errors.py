"""Exception hierarchy shared across the package."""


class BeamschedError(Exception):
    """Base class for all package errors."""


class ConfigError(BeamschedError):
    """Invalid configuration value or unusable config file."""


class GeometryError(BeamschedError):
    """A beam boresight ray misses the Earth or a layout cannot be built."""


class SynthesisError(BeamschedError):
    """User placement or channel synthesis failed (e.g. rejection cap hit)."""


class NumericalError(BeamschedError):
    """A linear-algebra kernel hit its conditioning guard."""


class EnumerationCapError(BeamschedError):
    """Path enumeration would exceed the configured cap."""


class OracleCapError(BeamschedError):
    """Exhaustive-search allocation count exceeds the oracle cap."""


class GroupingError(BeamschedError):
    """No valid fictitious-color partition exists for the requested count."""


class SchedulingError(BeamschedError):
    """The path set admits no system of disjoint paths covering all nodes."""
