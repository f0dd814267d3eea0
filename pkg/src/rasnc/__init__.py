"""Chip-level simulator for analog (RAS) and digital relay network coding."""

__version__ = "0.1.0"
