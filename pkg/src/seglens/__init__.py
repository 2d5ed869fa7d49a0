"""Segment- and word-group-level diagnostics for binary text classifiers."""

from seglens.errors import (
    AlignmentError,
    ConfigError,
    DataError,
    OutOfVocabulary,
    SeglensError,
    UndefinedMetric,
    UndefinedSimilarity,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ConfigError",
    "DataError",
    "OutOfVocabulary",
    "SeglensError",
    "UndefinedMetric",
    "UndefinedSimilarity",
    "__version__",
]
