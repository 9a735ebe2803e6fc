"""Floquet master-equation toolkit for few emitters in a laser-driven cavity."""

__version__ = "0.1.0"
