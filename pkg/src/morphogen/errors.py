"""Exception hierarchy shared across the package."""


class MorphogenError(Exception):
    """Base class for all errors raised by morphogen."""


class DimensionError(MorphogenError):
    """Operands with incompatible shapes."""


class DataError(MorphogenError):
    """Malformed datasets, word lists, or generation specs."""


class CheckpointError(MorphogenError):
    """Unreadable, corrupt, or incompatible model/LM files."""


class SearchError(MorphogenError):
    """Invalid decoding configuration."""


class TrainError(MorphogenError):
    """Invalid training configuration or non-finite optimization state."""
