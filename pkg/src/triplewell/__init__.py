"""Quantum-classical correspondence toolkit for the three-well Bose-Hubbard model."""

__version__ = "0.1.0"
