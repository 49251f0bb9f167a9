"""Health-event prediction with transition functions on dynamic disease graphs."""

__version__ = "0.1.0"
