from __future__ import annotations


class RotorFsiError(Exception):
    """Base class of every error raised by rotorfsi"""

    def __init__(self, message: str, *args, **kwargs):
        self.details = kwargs.pop("details", [])
        super().__init__(message, *args, **kwargs)
        self.message = message


class ConfigError(RotorFsiError):
    """Raised when a run configuration cannot be used"""


class IoError(RotorFsiError):
    """Raised when a result or checkpoint file cannot be written or read"""
