"""Flat key=value configuration files and seed resolution.

Files hold one ``section.key = value`` pair per line, with ``#``
comments and blank lines ignored. Values stay strings until a typed
accessor converts them, so a bad value is reported with its key.
"""

from __future__ import annotations

import os

from .errors import DataError

ENV_SEED = "ANOMALENS_SEED"

__all__ = ["ENV_SEED", "Config", "parse_config_text", "load_config", "resolve_seed"]


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{source}:{lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise DataError(f"{source}:{lineno}: empty key")
        out[key] = value.strip()
    return out


class Config:
    """Typed view over parsed key=value pairs."""

    def __init__(self, values: dict[str, str] | None = None):
        self.values = dict(values or {})

    def get_str(self, key: str, default: str | None = None) -> str | None:
        return self.values.get(key, default)

    def _convert(self, key: str, caster, default):
        if key not in self.values:
            return default
        raw = self.values[key]
        try:
            return caster(raw)
        except ValueError:
            raise DataError(f"config key {key}: cannot parse {raw!r}") from None

    def get_int(self, key: str, default: int | None = None) -> int | None:
        return self._convert(key, int, default)

    def get_float(self, key: str, default: float | None = None) -> float | None:
        return self._convert(key, float, default)

    def get_floats(self, key: str, default=None):
        if key not in self.values:
            return default
        raw = self.values[key]
        try:
            return tuple(float(part) for part in raw.split(",") if part.strip())
        except ValueError:
            raise DataError(f"config key {key}: cannot parse {raw!r} as floats") from None

    def get_ints(self, key: str, default=None):
        if key not in self.values:
            return default
        raw = self.values[key]
        try:
            return tuple(int(part) for part in raw.split(",") if part.strip())
        except ValueError:
            raise DataError(f"config key {key}: cannot parse {raw!r} as integers") from None

    def get_strs(self, key: str, default=None):
        if key not in self.values:
            return default
        return tuple(part.strip() for part in self.values[key].split(",") if part.strip())


def load_config(path: str | None) -> Config:
    """Read a config file; None yields an empty Config."""
    if path is None:
        return Config()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}") from None
    return Config(parse_config_text(text, source=str(path)))


def resolve_seed(cli_seed: int | None, cfg: Config, default: int = 0) -> int:
    """Precedence: --seed flag, then config 'seed', then env, then default."""
    if cli_seed is not None:
        return int(cli_seed)
    from_cfg = cfg.get_int("seed")
    if from_cfg is not None:
        return from_cfg
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise DataError(f"{ENV_SEED} must be an integer, got {env!r}") from None
    return default
