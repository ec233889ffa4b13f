"""Flat key-value configuration files mapped onto the nested run config.

The on-disk format is one ``key = value`` pair per line with ``#`` comments;
nested sections use dotted keys (``channel.tx_power_dbm = 30``). Diffing two
experiment records is then trivial.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .engine import GeometryConfig, SimConfig
from .channel import ChannelConfig
from .errors import ConfigurationError
from .scheduler import MacConfig
from .stack import StackConfig
from .traffic import CoreConfig, TrafficConfig

_SECTIONS = {
    "geometry": GeometryConfig,
    "channel": ChannelConfig,
    "mac": MacConfig,
    "stack": StackConfig,
    "traffic": TrafficConfig,
    "core": CoreConfig,
}

# Run-level fields that may appear without a section prefix.
_SCALAR_FIELDS = {
    f.name: f
    for f in dataclasses.fields(SimConfig)
    if f.name not in _SECTIONS and f.name not in ("relay_positions", "ue_positions", "forced_relay_parents")
}


def _parse_value(text: str, target_type) -> object:
    text = text.strip()
    if target_type is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigurationError(f"expected a boolean, got {text!r}")
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    return text


def to_flat_dict(config: SimConfig) -> dict[str, object]:
    flat: dict[str, object] = {}
    for section, _ in _SECTIONS.items():
        sub = getattr(config, section)
        for f in dataclasses.fields(sub):
            flat[f"{section}.{f.name}"] = getattr(sub, f.name)
    for name in _SCALAR_FIELDS:
        flat[name] = getattr(config, name)
    return flat


def from_flat_dict(values: dict[str, object], base: SimConfig | None = None) -> SimConfig:
    base = base if base is not None else SimConfig()
    section_values: dict[str, dict] = {s: {} for s in _SECTIONS}
    scalars: dict[str, object] = {}
    for key, raw in values.items():
        if "." in key:
            section, field_name = key.split(".", 1)
            cls = _SECTIONS.get(section)
            if cls is None:
                raise ConfigurationError(f"unknown config section in key {key!r}")
            fields = {f.name: f for f in dataclasses.fields(cls)}
            if field_name not in fields:
                raise ConfigurationError(f"unknown config key {key!r}")
            ftype = fields[field_name].type
            section_values[section][field_name] = _coerce(raw, ftype)
        else:
            if key not in _SCALAR_FIELDS:
                raise ConfigurationError(f"unknown config key {key!r}")
            scalars[key] = _coerce(raw, _SCALAR_FIELDS[key].type)
    kwargs: dict[str, object] = dict(scalars)
    for section, vals in section_values.items():
        if vals:
            kwargs[section] = dataclasses.replace(getattr(base, section), **vals)
    return dataclasses.replace(base, **kwargs)


def _coerce(raw: object, type_name) -> object:
    if not isinstance(raw, str):
        return raw
    name = type_name if isinstance(type_name, str) else getattr(type_name, "__name__", "str")
    if name in ("int",):
        return _parse_value(raw, int)
    if name in ("float",):
        return _parse_value(raw, float)
    if name in ("bool",):
        return _parse_value(raw, bool)
    return raw.strip()


def load_config_file(path: str | Path, base: SimConfig | None = None) -> SimConfig:
    """Parse a flat key-value file into a run configuration."""
    values: dict[str, object] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, _, raw = stripped.partition("=")
        values[key.strip()] = raw.strip()
    return from_flat_dict(values, base)


def dump_config_file(config: SimConfig, path: str | Path) -> None:
    lines = [f"{key} = {value}" for key, value in sorted(to_flat_dict(config).items())]
    Path(path).write_text("\n".join(lines) + "\n")
