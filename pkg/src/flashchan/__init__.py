"""Per-page channel models for MLC flash memory and ECC frame-error-rate estimation."""

__version__ = "0.1.0"
