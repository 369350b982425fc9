"""Continuous-variable prepare&measure QKD: effective-entanglement witness and postselection key rates."""

__version__ = "0.1.0"
