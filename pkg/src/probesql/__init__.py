"""Probe-driven text-to-SQL pipeline with an execution-accuracy harness."""

__version__ = "0.1.0"
