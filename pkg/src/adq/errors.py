"""Error types shared across the toolkit.

Every error carries an ``exit_code`` so the CLI can map failures onto its
exit-status contract: 2 for configuration errors, 3 for I/O errors, 4 for
broken invariants or preconditions.
"""


class AdqError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 4


class ConfigError(AdqError):
    """Invalid parameter, flag, or configuration file."""

    exit_code = 2


class DataIoError(AdqError):
    """Unreadable, unwritable, or corrupt data file."""

    exit_code = 3


class InvariantViolation(AdqError):
    """A domain-type invariant does not hold."""


# --- dataset containers ---


class BadMagic(DataIoError):
    """File does not start with a recognized magic header."""

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class TruncatedFile(DataIoError):
    """File ends before the declared payload is complete."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class NonFiniteValue(DataIoError):
    """A feature row contains NaN or infinity."""

    def __init__(self, row, path=""):
        where = f" in {path}" if path else ""
        super().__init__(f"non-finite value at row {row}{where}")
        self.row = row


class IoFailure(DataIoError):
    """Underlying OS-level read/write failure."""


# --- bin generation ---


class UnknownId(InvariantViolation):
    """Item id is outside the dataset's id range."""


class InvalidBinCount(ConfigError):
    """Requested bin count cannot partition the dataset as promised."""


# --- texture scoring ---


class PatchTooLarge(ConfigError):
    """Patch side exceeds the image dimensions."""


class MissingImage(InvariantViolation):
    """A bin member has no image in the companion table."""

    def __init__(self, item_id):
        super().__init__(f"no image for item id {item_id}")
        self.item_id = item_id


# --- diversity scoring ---


class BinTooSmall(InvariantViolation):
    """Diversity needs at least two members to form negative pairs."""


class ZeroVector(InvariantViolation):
    """Cosine similarity is undefined for a zero-length vector."""


# --- importance sampling ---


class EmptyInput(InvariantViolation):
    """Operation requires at least one value."""


class LengthMismatch(InvariantViolation):
    """Parallel per-bin lists have different lengths."""


class BadAlpha(ConfigError):
    """Weighting coefficient must lie in [0, 1]."""


class BadKeepRatio(ConfigError):
    """Keep ratio must lie in (0, 1]."""


class QuotaExceedsBin(InvariantViolation):
    """A quota asks for more samples than its bin holds."""
