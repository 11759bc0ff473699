"""Cortex-M0 instruction-set simulator with event counters and energy models."""

__version__ = "0.1.0"
