from __future__ import annotations

from pathlib import Path

from rotorfsi.errors import ConfigError  # noqa
from rotorfsi.errors import RotorFsiError  # noqa

__version__ = Path(__file__).with_name("VERSION").read_text().strip()

__all__ = ["ConfigError", "RotorFsiError", "__version__"]
