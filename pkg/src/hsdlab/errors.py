"""Exception hierarchy.

The CLI maps these onto exit codes: data/config problems exit 2,
anything else raised during a run exits 3 (usage errors exit 1).
"""


class HsdlabError(Exception):
    """Base class for all package errors."""


class SchemaError(HsdlabError):
    """A required column is missing from an input file."""


class DataError(HsdlabError):
    """An input file is readable but its content is invalid."""


class UnknownLabelError(DataError):
    """A label string is neither HOF nor NOT."""

    def __init__(self, raw: str, where: str = ""):
        self.raw = raw
        suffix = f" ({where})" if where else ""
        super().__init__(f"unknown label {raw!r}{suffix}")


class ArgumentError(HsdlabError):
    """An operation was called with arguments violating its contract."""


class ConfigError(HsdlabError):
    """Run configuration file or overrides are invalid."""


class FormatError(HsdlabError):
    """A resource file (emoji table, unigram table, vectors) is malformed."""


class EmptySequenceError(HsdlabError):
    """The model was asked to run on a sample with no unmasked positions."""


class CheckpointError(HsdlabError):
    """Base class for checkpoint load failures."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint format version is not supported."""


class CheckpointFormatError(CheckpointError):
    """Checkpoint file is truncated or structurally corrupt."""


class FingerprintError(HsdlabError):
    """Vocabulary fingerprint does not match the checkpoint's."""


class EnsembleMismatchError(HsdlabError):
    """Checkpoints in an ensemble disagree on config or vocabulary."""


class JoinError(HsdlabError):
    """Prediction and gold files share no ids."""
