"""Scenario-driven command-line interface (``mrqsim``)."""

from .main import main

__all__ = ["main"]
