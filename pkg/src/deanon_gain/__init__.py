"""Quantify de-anonymization gain as a function of an attacker's background knowledge."""

__version__ = "0.1.0"
