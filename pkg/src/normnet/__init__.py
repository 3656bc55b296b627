"""Normality testing with classical statistics, a kernel Stein test and a
descriptor-based neural classifier."""

__version__ = "0.1.0"
