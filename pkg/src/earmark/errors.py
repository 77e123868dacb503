"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 1, I/O failures -> 2,
ValidationError -> 3, NumericError -> 4.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PipelineError):
    """Bad configuration: invalid value, unknown key, inconsistent plan."""


class ValidationError(PipelineError):
    """Input data violates a contract (format, shape, cross-reference)."""


class AudioFormatError(ValidationError):
    """WAV file exists but is not 16-bit mono PCM at the required rate."""


class ManifestError(ValidationError):
    """Manifest file is malformed or internally inconsistent."""


class ArchiveError(ValidationError):
    """Feature archive or checkpoint is malformed, truncated, or mismatched."""


class NumericError(PipelineError):
    """Numeric health check failed (NaN gradients, gradcheck failure)."""
