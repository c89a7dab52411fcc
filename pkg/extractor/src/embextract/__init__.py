"""Audio-to-embedding extraction front end for the vocal fatigue pipeline."""

__version__ = "0.1.0"
