"""Exception hierarchy shared across the toolbox.

Every operational failure raises a subclass of :class:`OpenTiError` so the
dispatcher and the CLI can distinguish "a tool failed" from a programming
error.
"""


class OpenTiError(Exception):
    """Base class for all operational errors."""


# --- language-model boundary -------------------------------------------------

class NetworkError(OpenTiError):
    """Remote endpoint unreachable after the configured retries."""


class AuthError(OpenTiError):
    """Remote endpoint rejected the credentials."""


class ScriptMiss(OpenTiError):
    """The scripted mock has no entry for the message it was asked to answer."""


# --- tool registry / dispatch -------------------------------------------------

class DuplicateName(OpenTiError):
    """A tool with this name is already registered."""


class MissingParams(OpenTiError):
    def __init__(self, missing):
        self.missing = list(missing)
        super().__init__(f"missing required parameters: {', '.join(self.missing)}")


class TypeMismatch(OpenTiError):
    def __init__(self, param, expected, got=None):
        self.param = param
        self.expected = expected
        detail = f"parameter '{param}' expected {expected}"
        if got is not None:
            detail += f", got {got!r}"
        super().__init__(detail)


# --- geo / network ------------------------------------------------------------

class NotFound(OpenTiError):
    """Geocoder produced no hit for the requested place."""


class ServiceError(OpenTiError):
    """A remote geo service failed or answered with garbage."""


class AreaTooLarge(OpenTiError):
    """Requested bounding box exceeds the download guard."""


class NoFixture(OpenTiError):
    """Offline mode has no bundled map covering the requested box."""


class MalformedXML(OpenTiError):
    """Input file is not the OSM XML subset we consume."""


class EmptyNetwork(OpenTiError):
    """No eligible ways / nodes in the input."""


class EmptyResult(OpenTiError):
    """A filter produced an empty network."""


class IoError(OpenTiError):
    """Filesystem writes failed."""


# --- demand / calibration ------------------------------------------------------

class AllZonesEmpty(OpenTiError):
    """Every zone has node_count 0, the gravity model is undefined."""


class SimFailure(OpenTiError):
    """A fitness simulation failed during calibration."""

    def __init__(self, generation, cause):
        self.generation = generation
        self.cause = cause
        super().__init__(f"simulation failed in generation {generation}: {cause}")


# --- simulation -----------------------------------------------------------------

class UnreachablePair(OpenTiError):
    def __init__(self, origin, destination):
        self.origin = origin
        self.destination = destination
        super().__init__(f"no drivable path from zone {origin} to zone {destination}")


class ControllerError(OpenTiError):
    """A signal controller returned an invalid action."""


class BackendError(OpenTiError):
    """External simulator adapter exited abnormally."""


class SchemaError(OpenTiError):
    """A metrics/report file is missing required fields."""


# --- tsc lab ---------------------------------------------------------------------

class InvalidSpec(OpenTiError):
    """Policy specification outside the documented ranges."""


class UnreadableLog(OpenTiError):
    """Log/metrics file could not be parsed."""


class EmptyCurve(OpenTiError):
    """Training curve has no records to plot."""


# --- meta control ------------------------------------------------------------------

class ExtractionFailure(OpenTiError):
    """Policy brief could not be extracted from the user text."""


# --- evaluation ---------------------------------------------------------------------

class UnevenTrials(OpenTiError):
    """Tasks in one battery were run a different number of times."""


# --- service ---------------------------------------------------------------------------

class BindError(OpenTiError):
    """HTTP service could not bind its address."""
