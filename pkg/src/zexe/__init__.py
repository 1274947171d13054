"""Zeroth-order attacks on byte-level malware detectors over a toy executable format."""

__version__ = "0.1.0"
