"""Multi-bank patchwork money simulator over a black-box quantum token model."""

__version__ = "0.1.0"
