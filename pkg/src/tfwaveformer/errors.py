"""Exception types shared across the package.

Everything raised deliberately by this library derives from
:class:`TfwError` so callers can catch one base class at the CLI
boundary and turn it into a clean exit message.
"""


class TfwError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(TfwError):
    """An API was called in a way its contract forbids (e.g. backward on a
    non-scalar, an empty batch, metrics on a single-class label vector)."""


class ShapeError(TfwError):
    """Tensor or array shapes are inconsistent with the requested operation."""


class IngestError(TfwError):
    """A data file violates ordering requirements; message carries the
    offending line number."""


class DataFormatError(TfwError):
    """A data or checkpoint file is structurally malformed (ragged rows,
    truncated payload, bad magic)."""


class NodeLookupError(TfwError):
    """A node id was requested that the store has never seen."""


class ScaleError(TfwError):
    """A convolution kernel is too long for the sequence it is applied to."""


class ParameterError(TfwError):
    """A numeric hyperparameter is outside its legal range."""


class ConfigError(TfwError):
    """A run configuration is invalid: unknown key, failed validation rule,
    or unusable dimension combination."""


class CheckpointVersionError(TfwError):
    """A checkpoint was written by an incompatible format version; the
    message names both the found and the supported version."""


class DivergenceError(TfwError):
    """Training produced a non-finite loss; message includes parameter
    norms to aid debugging."""
