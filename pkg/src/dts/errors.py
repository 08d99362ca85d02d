"""Exception hierarchy shared across the pipeline.

Each class maps to a CLI exit code (see cli.EXIT_CODES): configuration
problems exit 2, missing upstream artifacts exit 3, malformed data exits 4.
"""


class DtsError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(DtsError):
    """Invalid or inconsistent configuration."""


class MissingArtifactError(DtsError):
    """A stage was run before its upstream artifacts exist."""

    def __init__(self, artifact: str):
        super().__init__(f"missing artifact: {artifact}")
        self.artifact = artifact


class DataError(DtsError):
    """Malformed input data or corrupted artifact file."""
