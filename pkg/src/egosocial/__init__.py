"""Social interaction detection from egocentric photo-stream face tracks."""

__version__ = "0.1.0"
