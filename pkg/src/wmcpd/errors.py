class InvalidParameter(ValueError):
    """A size, probability or configuration value is out of range."""


class InvalidToken(ValueError):
    """A token id outside ``[0, vocab_size)``."""
