"""Bidirectional hierarchical fusion of protein sequence and structure encoders."""

__version__ = "0.1.0"
