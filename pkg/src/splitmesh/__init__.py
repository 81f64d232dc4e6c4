"""Multi-site split learning over a binary wire protocol."""

__version__ = "0.1.0"
