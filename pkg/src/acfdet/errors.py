"""Exception hierarchy; the CLI maps these to distinct exit codes."""


class AcfdetError(Exception):
    """Base class for all package errors."""


class ConfigError(AcfdetError):
    """Invalid or inconsistent configuration."""


class ValidationError(AcfdetError):
    """Invalid runtime input (bad image, malformed data, contract violation)."""


class ModelFormatError(AcfdetError):
    """Base class for model (de)serialization failures."""


class ModelVersionError(ModelFormatError):
    """Model file has an unsupported format version."""


class ModelTruncatedError(ModelFormatError):
    """Model file ends before the declared payload."""


class ModelChecksumError(ModelFormatError):
    """Model payload does not match its checksum."""
