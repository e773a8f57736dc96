"""Exception types shared across the toolkit."""


class DriftvecError(Exception):
    """Base class for all driftvec errors."""


class ConfigError(DriftvecError):
    """Invalid or missing configuration (CLI exit code 2)."""


class OutOfSpan(DriftvecError):
    """A document timestamp falls outside every configured time slice."""


class EmptyVocabulary(DriftvecError):
    """No token passed the frequency threshold."""


class InvalidAlpha(DriftvecError):
    """Smoothing constant must be strictly positive."""


class DimensionMismatch(DriftvecError):
    """Operands have incompatible vocabulary sizes or embedding dimensions."""


class ConvergenceFailure(DriftvecError):
    """An iterative solver exhausted its budget (CLI exit code 4)."""


class DegenerateInput(DriftvecError):
    """Alignment is undefined for this input (zero cross-covariance)."""


class UnknownWord(DriftvecError):
    """One or more queried words are not in the vocabulary."""

    def __init__(self, words):
        if isinstance(words, str):
            words = [words]
        self.words = list(words)
        super().__init__("unknown word(s): " + ", ".join(self.words))


class InvalidScenario(DriftvecError):
    """Contradictory synthetic-corpus parameters."""
