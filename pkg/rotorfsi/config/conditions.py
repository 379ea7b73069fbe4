"""
Basic assertions resolved by name from validator operations
"""
from __future__ import annotations


def gt(value, other):
    """Greater than"""
    return value > other


def gte(value, other):
    """Greater than or equal"""
    return value >= other


def lte(value, other):
    """Lower than or equal"""
    return value <= other


def is_type_of(value, other):
    """Type check, bools never count as numbers"""
    if isinstance(value, bool) and other is not bool:
        if isinstance(other, tuple):
            return bool in other
        return False
    return isinstance(value, other)


def is_in(value, other):
    """Existence"""
    return value in other


def len_eq(value, other):
    """Length Equal"""
    return len(value) == other


def len_min(value, other):
    """Minimum length"""
    return len(value) >= other
