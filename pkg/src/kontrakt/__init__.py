"""Contract-based verification with knowledge and probability."""

__version__ = "0.1.0"
