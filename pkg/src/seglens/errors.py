"""Exception hierarchy shared by all modules."""


class SeglensError(Exception):
    """Base class for every error raised by seglens."""


class ConfigError(SeglensError):
    """Invalid configuration: bad parameter, bad rule, missing input file."""

    def __init__(self, message, path=None):
        super().__init__(message)
        self.path = None if path is None else str(path)


class DataError(SeglensError):
    """Malformed or inconsistent input data."""

    def __init__(self, message, path=None, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.path = None if path is None else str(path)
        self.line = line


class AlignmentError(DataError):
    """Attribution record does not line up with the corpus tokenization."""


class OutOfVocabulary(SeglensError, KeyError):
    """Token has no embedding vector."""

    def __init__(self, token):
        super().__init__(token)
        self.token = token

    def __str__(self):
        return f"out of vocabulary: {self.token!r}"


class UndefinedSimilarity(SeglensError, ValueError):
    """Cosine similarity with a zero-norm vector."""


class UndefinedMetric(SeglensError, ValueError):
    """A metric whose denominator is zero (reported as n/a)."""
