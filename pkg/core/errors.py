"""
errors.py — the one exception type the toolkit raises on bad input.
"""

from __future__ import annotations


class ParameterError(ValueError):
    """
    Raised whenever an argument breaks a documented precondition:
    gamma outside (0, 1), k > s, a deltas list that is not nondecreasing,
    mismatched lengths between p-values and constants, and so on.

    It subclasses ValueError so callers (and pydantic validators, which wrap
    ValueError into ValidationError) can catch it the usual way.
    """
