"""Flat ``key = value`` experiment configs with typed keys per subcommand."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidInputError


class ConfigError(InvalidInputError):
    pass


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _bool(text):
    low = str(text).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _ints(text):
    return tuple(int(x) for x in str(text).replace(",", " ").split())


PV_KEYS = {
    "pv.delta": float,
    "pv.panel_order": int,
    "pv.r_max": float,
    "pv.tail_tol": float,
    "pv.near_scheme": _choice("symmetric_reflection", "taylor_subtraction"),
}

COMMON_KEYS = {"workers": int, "serial": _bool, "output": str}

SCHEMAS = {
    "counterexample": {
        "n": int,
        "beta": float,
        "eta_min": float,
        "eta_max": float,
        "points": int,
        "window_lo": float,
        "window_hi": float,
        "quad.order": int,
        **PV_KEYS,
        **COMMON_KEYS,
    },
    "born": {
        "n": int,
        "beta": float,
        "order": int,
        "c0": float,
        "preset": _choice("bessel_power", "gaussian"),
        "gaussian_a": float,
        "eta_min": float,
        "eta_max": float,
        "points": int,
        "window_lo": float,
        "window_hi": float,
        "quad.order": int,
        "s3.orders": _ints,
        "q3.budget": float,
        **PV_KEYS,
        **COMMON_KEYS,
    },
    "verify": {"suite": str, "seed": int, "cases": int, "output": str},
    "decay-fit": {
        "input": str,
        "potential": _choice("bessel_power", "g_beta", "gaussian"),
        "n": int,
        "beta": float,
        "gaussian_a": float,
        "bump_scale": float,
        "window_lo": float,
        "window_hi": float,
        "output": str,
    },
}


@dataclass
class ExperimentConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in SCHEMAS:
            raise ConfigError(f"unknown subcommand {self.command!r}")
        schema = SCHEMAS[self.command]
        typed = {}
        for key, raw in self.values.items():
            if key not in schema:
                raise ConfigError(f"unknown config key {key!r} for {self.command}")
            typed[key] = _convert(schema, key, raw)
        self.values = typed

    def get(self, key, default=None):
        return self.values.get(key, default)

    def merged(self, overrides: dict) -> "ExperimentConfig":
        """A copy with ``overrides`` applied; None values are ignored."""
        vals = dict(self.values)
        vals.update({k: v for k, v in overrides.items() if v is not None})
        return ExperimentConfig(self.command, vals)

    def with_defaults(self, defaults: dict) -> "ExperimentConfig":
        vals = dict(defaults)
        vals.update(self.values)
        return ExperimentConfig(self.command, vals)

    def to_text(self) -> str:
        lines = []
        for key in sorted(self.values):
            v = self.values[key]
            if isinstance(v, tuple):
                v = " ".join(str(x) for x in v)
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + ("\n" if lines else "")

    def as_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in sorted(self.values.items())}


def _convert(schema, key, raw):
    conv = schema[key]
    if not isinstance(raw, str):
        if conv is _ints and isinstance(raw, (list, tuple)):
            return tuple(int(x) for x in raw)
        raw = str(raw) if not isinstance(raw, bool) else ("true" if raw else "false")
    try:
        return conv(raw.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value {raw!r} for {key}: {exc}") from None


def parse_config(text: str, command: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value
    return ExperimentConfig(command, values)


def load_config(path, command: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, command)
