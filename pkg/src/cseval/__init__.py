"""Scoring and validation tools for code-switched English/Mandarin language
identification and language diarization."""

__version__ = "0.1.0"
