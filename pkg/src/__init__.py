"""Hybrid agent/component runtime and the indexing pipeline built on it."""
