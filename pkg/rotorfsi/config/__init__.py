from __future__ import annotations

from rotorfsi.config.loader import environ_overrides
from rotorfsi.config.loader import find_config
from rotorfsi.config.loader import load_config
from rotorfsi.config.loader import load_mapping
from rotorfsi.config.loader import ParseError
from rotorfsi.config.loader import read_config
from rotorfsi.config.loader import RunConfig
from rotorfsi.config.loader import serialize_config
from rotorfsi.config.validator import ValidationError
from rotorfsi.config.validator import Validator
from rotorfsi.config.validator import ValidatorList

__all__ = [
    "environ_overrides",
    "find_config",
    "load_config",
    "load_mapping",
    "ParseError",
    "read_config",
    "RunConfig",
    "serialize_config",
    "ValidationError",
    "Validator",
    "ValidatorList",
]
