"""Run configuration files.

Configurations are TOML documents with one table per section (see
``docs/config.md``). Loading merges, in order:

1. the defaults of :mod:`rotorfsi.config.schema`,
2. the file,
3. ``ROTORFSI_<SECTION>__<KEY>`` environment variables, when an environ
   mapping is passed,

then validates the result and reports every failure at once.
"""
from __future__ import annotations

import copy
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any
from typing import Mapping

import toml

from rotorfsi.assembly import AssemblyOptions
from rotorfsi.assembly import MaterialParams
from rotorfsi.config.schema import build_validators
from rotorfsi.config.schema import DEFAULTS
from rotorfsi.config.schema import SECTIONS
from rotorfsi.config.validator import empty
from rotorfsi.config.validator import get_dotted
from rotorfsi.config.validator import set_dotted
from rotorfsi.config.validator import ValidationError
from rotorfsi.config.validator import ValidatorList
from rotorfsi.errors import ConfigError
from rotorfsi.linsolve import InnerSolverConfig
from rotorfsi.linsolve import SolverConfig
from rotorfsi.mesh import ChannelRotorGeometry
from rotorfsi.rotation import RotationSpec
from rotorfsi.timeloop import LoopConfig

logger = logging.getLogger(__name__)

ENVVAR_PREFIX = "ROTORFSI_"
PRESETS = Path(__file__).resolve().parent.parent / "presets"


class ParseError(ConfigError):
    """Raised when a configuration is not valid TOML"""

    def __init__(self, message: str, *args, **kwargs):
        self.line = kwargs.pop("line", None)
        self.column = kwargs.pop("column", None)
        super().__init__(message, *args, **kwargs)


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Validated settings with builders for the engine objects"""

    values: Mapping[str, Mapping[str, Any]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RunConfig):
            return NotImplemented
        return self.values == other.values

    def get(self, name: str, default: Any = None) -> Any:
        value = get_dotted(self.values, name)
        return default if value is empty else value

    def __getitem__(self, name: str) -> Any:
        return self.values[name]

    def geometry(self) -> ChannelRotorGeometry:
        section = dict(self.values["geometry"])
        section["center"] = tuple(section["center"])
        return ChannelRotorGeometry(**section)

    def materials(self) -> MaterialParams:
        return MaterialParams(**self.values["materials"])

    def loop(self) -> LoopConfig:
        section = dict(self.values["loop"])
        section.pop("coupling")
        return LoopConfig(**section)

    def rotation(self) -> RotationSpec:
        section = self.values["rotation"]
        center = tuple(self.values["geometry"]["center"])
        schedule = section["schedule"]
        if not schedule:
            schedule = [[0.0, section["angular_velocity"]]]
        return RotationSpec(
            center=center,
            schedule=tuple(tuple(pair) for pair in schedule),
            initial_angle=section["initial_angle"],
        )

    def assembly_options(self) -> AssemblyOptions:
        section = self.values["discretization"]
        return AssemblyOptions(
            pressure_stabilization=section["pressure_stabilization"],
            supg=section["supg"],
            viscous_factor=section["viscous_factor"],
            linearization=section["linearization"],
            convection=section["convection"],
            coupling=self.values["loop"]["coupling"],
        )

    def solver(self) -> SolverConfig:
        section = self.values["solver"]
        inner = InnerSolverConfig(
            tolerance=section["inner_tolerance"],
            max_iterations=section["inner_max_iterations"],
            sweeps=section["inner_sweeps"],
            lu_fallback=section["lu_fallback"],
        )
        return SolverConfig(
            method=section["method"],
            tolerance=section["tolerance"],
            restart=section["restart"],
            max_iterations=section["max_iterations"],
            preconditioner=section["preconditioner"],
            inner=inner,
            lu_fallback=section["lu_fallback"],
        )

    def replace(self, **updates: Any) -> RunConfig:
        """Copy with dotted keys overridden, validated again.

        Keys use ``__`` for the dot: ``replace(materials__young_modulus=1)``.
        """
        values = copy.deepcopy(dict(self.values))
        for key, value in updates.items():
            set_dotted(values, key.replace("__", "."), value)
        return load_mapping(values)


def _parse_literal(raw: str) -> Any:
    """TOML literal of an environment value, else the raw string"""
    try:
        return toml.loads(f"value = {raw}")["value"]
    except toml.TomlDecodeError:
        return raw


def environ_overrides(environ: Mapping[str, str]) -> dict[str, Any]:
    """Dotted overrides from ``ROTORFSI_<SECTION>__<KEY>`` variables"""
    overrides: dict[str, Any] = {}
    for name in sorted(environ):
        if not name.startswith(ENVVAR_PREFIX):
            continue
        section, sep, key = name[len(ENVVAR_PREFIX):].partition("__")
        if not sep or not key:
            continue
        dotted = f"{section.lower()}.{key.lower()}"
        overrides[dotted] = _parse_literal(environ[name])
        logger.debug("environment override %s", dotted)
    return overrides


def _unknown_keys(data: Mapping) -> list[tuple[str, str]]:
    found = []
    for section, table in data.items():
        if section not in SECTIONS:
            found.append((section, f"unknown section [{section}]"))
            continue
        if not isinstance(table, Mapping):
            found.append((section, f"{section} must be a table"))
            continue
        for key in table:
            if key not in SECTIONS[section]:
                name = f"{section}.{key}"
                found.append((name, f"unknown key {name}"))
    return found


def _cross_checks(values: Mapping) -> list[tuple[str, str]]:
    found = []
    rotation = values.get("rotation", {})
    if rotation.get("schedule") and "angular_velocity" in rotation:
        found.append(
            (
                "rotation.angular_velocity",
                "give either rotation.angular_velocity or "
                "rotation.schedule, not both",
            )
        )
    geometry = values.get("geometry", {})
    try:
        geom = ChannelRotorGeometry(
            **{**geometry, "center": tuple(geometry["center"])}
        )
    except (KeyError, TypeError, ValueError):
        return found
    found.extend(
        (f"geometry.{field}", message)
        for field, message in geom.violations()
    )
    return found


def load_mapping(
    data: Mapping, environ: Mapping[str, str] | None = None
) -> RunConfig:
    """Validate parsed settings, defaults filled in.

    :raises ValidationError: with one ``(field, message)`` detail per
        failure.
    """
    details = _unknown_keys(data)
    values: dict[str, dict[str, Any]] = {name: {} for name in SECTIONS}
    for name, value in DEFAULTS.items():
        set_dotted(values, name, copy.deepcopy(value))
    for section, table in data.items():
        if section in SECTIONS and isinstance(table, Mapping):
            for key, value in table.items():
                if key in SECTIONS[section]:
                    values[section][key] = copy.deepcopy(value)
    if environ is not None:
        for name, value in environ_overrides(environ).items():
            section, _, key = name.partition(".")
            if key not in SECTIONS.get(section, ()):
                details.append((name, f"unknown key {name}"))
                continue
            set_dotted(values, name, value)

    validators = ValidatorList(values, build_validators())
    try:
        validators.validate_all()
    except ValidationError as error:
        details.extend(error.details)
    if not details:
        details.extend(_cross_checks(values))
    if details:
        raise ValidationError(
            "; ".join(message for _, message in details), details=details
        )
    ordered = {
        section: {
            key: values[section][key]
            for key in keys
            if key in values[section]
        }
        for section, keys in SECTIONS.items()
    }
    return RunConfig(ordered)


def load_config(
    text: str, environ: Mapping[str, str] | None = None
) -> RunConfig:
    """Parse and validate configuration text.

    :raises ParseError: the text is not TOML, with ``line``/``column``.
    :raises ValidationError: listing every invalid or missing field.
    """
    try:
        data = toml.loads(text)
    except toml.TomlDecodeError as error:
        raise ParseError(
            f"line {error.lineno} column {error.colno}: {error.msg}",
            line=error.lineno,
            column=error.colno,
        ) from error
    return load_mapping(data, environ)


def find_config(filename: str | os.PathLike) -> Path:
    """The file as given, in the working directory, or a shipped preset"""
    path = Path(filename)
    candidates = [path]
    if not path.is_absolute():
        candidates.append(Path.cwd() / path)
        candidates.append(PRESETS / path.name)
    for candidate in candidates:
        if candidate.is_file():
            return candidate
    raise ConfigError(
        f"configuration {str(filename)!r} not found",
        details=[str(candidate) for candidate in candidates],
    )


def read_config(
    filename: str | os.PathLike, environ: Mapping[str, str] | None = None
) -> RunConfig:
    path = find_config(filename)
    logger.info("loading configuration %s", path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as error:
        raise ConfigError(f"cannot read {path}: {error}") from error
    return load_config(text, environ)


def serialize_config(config: RunConfig) -> str:
    """Canonical TOML: fixed section and key order, every key written"""
    blocks = []
    for section, keys in SECTIONS.items():
        table = config.values[section]
        body = {key: table[key] for key in keys if key in table}
        blocks.append(f"[{section}]\n{toml.dumps(body)}")
    return "\n".join(blocks)
