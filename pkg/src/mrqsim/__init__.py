"""Desk-scale simulator and pulse compiler for gradient-defined MRI qubits."""

__version__ = "0.1.0"
