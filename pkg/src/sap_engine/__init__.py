"""Saliency-aware evolutionary selection of reasoning principles."""

__version__ = "0.1.0"
