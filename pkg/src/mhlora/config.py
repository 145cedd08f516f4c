"""Experiment configuration and its flat ``key = value`` file format.

Lines are ``key = value``; ``#`` starts a comment; blank lines are ignored.
Unknown keys and unparsable values are rejected with the offending line
number. Every key maps one-to-one onto an :class:`ExperimentConfig` field.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

MAX_CLUSTER_CHANNELS = 16


class Architecture(str, enum.Enum):
    SUBGHZ = "subghz"
    ISM2G4 = "24ghz"
    PROPOSAL = "proposal"


@dataclass(frozen=True)
class ExperimentConfig:
    architecture: Architecture = Architecture.PROPOSAL
    n_eds: int = 500
    n_relays: int = 5
    area_side: float = 5000.0
    building_side: float = 50.0
    building_pitch: float = 100.0
    building_height: float = 20.0
    sim_time: float = 300.0
    t_u: float = 1.0
    b_u: int = 10
    ed_tx_power: float = 12.5
    relay_tx_power: float = 16.0
    gain_ed: float = 0.0
    gain_relay: float = 0.0
    gain_gw: float = 0.0
    bw_eu868: float = 125_000.0
    bw_ism2g4: float = 203_000.0
    coding_rate: int = 1
    preamble_symbols: int = 8
    h_gw: float = 25.0
    h_node: float = 1.5
    los_model: str = "geometric"
    shadowing: bool = True
    o2i_loss: float = 20.0
    capture_gamma: float = 6.0
    adr_margin: float = 10.0
    relay_self_traffic: bool = True
    relay_queue_limit: int = 10_000
    rx_window_symbols: float = 5.0
    run_count: int = 200
    base_seed: int = 1

    def __post_init__(self):
        if isinstance(self.architecture, str) and not isinstance(self.architecture, Architecture):
            object.__setattr__(self, "architecture", parse_architecture(self.architecture))
        self.validate()

    def validate(self) -> None:
        if self.n_eds < 0 or self.n_relays < 0:
            raise ConfigError("node counts must be non-negative")
        if self.architecture is Architecture.PROPOSAL and self.n_relays > MAX_CLUSTER_CHANNELS:
            raise ConfigError(
                f"the proposal supports at most {MAX_CLUSTER_CHANNELS} relays, got {self.n_relays}"
            )
        if self.t_u <= 0 or self.b_u <= 0 or self.sim_time <= 0:
            raise ConfigError("t_u, b_u and sim_time must be positive")
        if self.area_side <= 0:
            raise ConfigError("area_side must be positive")
        if self.building_pitch < self.building_side:
            raise ConfigError("building_pitch must be >= building_side")
        if self.los_model not in ("geometric", "probabilistic"):
            raise ConfigError(f"unknown los_model {self.los_model!r}")
        if self.adr_margin < 0:
            raise ConfigError("adr_margin must be >= 0")
        if self.run_count < 1:
            raise ConfigError("run_count must be >= 1")
        if not 1 <= self.coding_rate <= 4:
            raise ConfigError("coding_rate must be 1..4 (4/5..4/8)")

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)


def parse_architecture(text: str) -> Architecture:
    aliases = {"subghz": "subghz", "sub-ghz": "subghz", "eu868": "subghz",
               "24ghz": "24ghz", "2.4ghz": "24ghz", "ism2g4": "24ghz",
               "proposal": "proposal"}
    key = str(text).strip().lower()
    if key not in aliases:
        raise ConfigError(f"unknown architecture {text!r}")
    return Architecture(aliases[key])


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def coerce(key: str, raw: Any) -> Any:
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[key]
    if kind == "Architecture":
        return parse_architecture(raw)
    if kind == "bool":
        return _parse_bool(raw)
    if kind == "int":
        value = float(raw)
        if not value.is_integer():
            raise ValueError(f"{key} must be an integer, got {raw!r}")
        return int(value)
    if kind == "float":
        return float(raw)
    return raw.strip()


def parse_config_text(text: str, source: str = "<config>") -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if not key or not raw:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        try:
            values[key] = coerce(key, raw)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Read a config file (optional) and apply overrides on top of it."""
    values: dict[str, Any] = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
        values.update(parse_config_text(text, str(p)))
    for key, raw in (overrides or {}).items():
        try:
            values[key] = coerce(key, raw)
        except ValueError as exc:
            raise ConfigError(f"override {key}: {exc}") from None
    return ExperimentConfig(**values)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, Architecture):
            value = value.value
        elif isinstance(value, bool):
            value = str(value).lower()
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
