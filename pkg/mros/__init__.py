"""Multi-resolution overlapping-stripe person re-identification."""

__version__ = "0.1.0"
