"""Visually grounded paraphrase extraction from image captions."""

__version__ = "0.1.0"
