"""Grounding adapter: turns images into the engine's grounding manifest."""

__version__ = "0.1.0"
