"""Flat key=value experiment configuration files.

One ``key = value`` pair per line; blank lines and ``#`` comments are
ignored.  Values stay strings until a typed getter coerces them, so a
bad value is reported with its key when it is actually used.
"""

from __future__ import annotations

__all__ = ["ConfigError", "Config", "load_config", "parse_config"]


class ConfigError(Exception):
    """Malformed configuration file or value."""


class Config:
    def __init__(self, values: dict[str, str] | None = None):
        self._values = dict(values or {})

    def get(self, key: str, default: str | None = None) -> str | None:
        return self._values.get(key, default)

    def get_int(self, key: str, default: int) -> int:
        raw = self._values.get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None

    def get_float(self, key: str, default: float) -> float:
        raw = self._values.get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None

    def get_str(self, key: str, default: str) -> str:
        raw = self._values.get(key, default)
        return raw

    def get_list(self, key: str, default: str) -> list[str]:
        raw = self._values.get(key, default)
        items = [part.strip() for part in raw.split(",")]
        items = [part for part in items if part]
        if not items:
            raise ConfigError(f"{key}: expected a comma-separated list")
        return items

    def get_int_list(self, key: str, default: str) -> list[int]:
        out = []
        for part in self.get_list(key, default):
            try:
                out.append(int(part))
            except ValueError:
                raise ConfigError(
                    f"{key}: expected integers, got {part!r}"
                ) from None
        return out

    def require_positive(self, key: str, value: int) -> int:
        if value <= 0:
            raise ConfigError(f"{key}: must be positive, got {value}")
        return value


def parse_config(text: str, source: str = "<config>") -> Config:
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        values[key] = value
    return Config(values)


def load_config(path: str | None) -> Config:
    """Parse a config file; a missing path yields all defaults."""
    if path is None:
        return Config()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, source=path)
