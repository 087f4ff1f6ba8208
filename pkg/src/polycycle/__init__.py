"""Counting limit cycles near one- and two-saddle polycycles by complex transport."""

__version__ = "0.1.0"
