"""Multimodal multi-agent orchestration: supervisor routing, grounded retrieval,
pluggable model backends, and a streaming gateway."""

__version__ = "0.1.0"
