"""Exception types shared across the toolkit.

Every error raised by the public API derives from ParError so callers can
catch toolkit failures with a single except clause.
"""


class ParError(Exception):
    """Base class for all toolkit errors."""


# --- manifest / dataset ---------------------------------------------------

class ManifestError(ParError):
    """Base class for manifest parsing and validation failures."""


class MissingSchema(ManifestError):
    """Manifest has no attribute header or schema block."""


class UnknownAttribute(ManifestError):
    """A label references an attribute absent from the schema."""


class MissingImage(ManifestError):
    """An image path in the manifest does not resolve to a file."""


class DuplicateSampleId(ManifestError):
    """Two manifest rows share the same sample_id."""


class DegenerateSplit(ParError):
    """A train/validation split would leave one side empty."""


class EmptyDataset(ParError):
    """An operation that needs samples received none."""


# --- losses / metrics -----------------------------------------------------

class ShapeMismatch(ParError):
    """Array arguments have incompatible shapes."""


class NonBinaryTarget(ParError):
    """Target matrix contains values other than 0 and 1."""


class DegenerateRatio(ParError):
    """A positive ratio of exactly 0 or 1 where the loss needs 0 < r < 1."""


# --- images / models ------------------------------------------------------

class InvalidImage(ParError):
    """Image buffer is empty or has the wrong number of channels."""


class UnknownBackbone(ParError):
    """Backbone name is not one of the registered families."""


class WeightsLoadError(ParError):
    """A parameter checkpoint could not be read or applied."""


class StrictMismatch(WeightsLoadError):
    """Strict weight loading found missing or incompatible parameters."""


class NonFiniteLoss(ParError):
    """Training produced a NaN or infinite loss."""


# --- serving --------------------------------------------------------------

class DecodeError(ParError):
    """Uploaded bytes do not decode to a valid image."""


class PayloadTooLarge(ParError):
    """Uploaded image exceeds the configured size cap."""


class ModelNotLoaded(ParError):
    """The service has no model artifact loaded."""


class InvalidArtifact(ParError):
    """A model artifact directory is missing files or is corrupt."""


class PortInUse(ParError):
    """The requested service port is already bound."""
