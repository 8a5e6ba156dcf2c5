"""Content-polluter detection over partially observed tweet streams."""

__version__ = "0.1.0"
