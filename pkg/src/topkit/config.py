"""Line-oriented `key = value` job configuration.

A job file is UTF-8 text, one `key = value` per line; blank lines and
lines starting with `#` are ignored. Every subcommand declares the keys
it accepts, with types and defaults; unknown and duplicate keys are
rejected so typos fail loudly instead of silently falling back to a
default. The fully resolved configuration (defaults filled in, overrides
applied) has a canonical one-line rendering that output files embed, so
a run records exactly what produced it.
"""

from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

_REQUIRED = object()


@dataclass(frozen=True)
class Key:
    """One accepted configuration key: type, default, allowed values."""

    kind: str  # one of: str, int, float, bool, path
    default: object = _REQUIRED
    choices: tuple[str, ...] | None = None

    @property
    def required(self) -> bool:
        return self.default is _REQUIRED


def parse_config_text(text: str, source: str = "config") -> dict[str, str]:
    """Raw key -> value strings; duplicates and malformed lines rejected."""
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def read_config(path: str | Path) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {p} does not exist")
    return parse_config_text(p.read_text(encoding="utf-8"), source=str(p))


def _convert(name: str, value: str, key: Key):
    if key.kind == "str":
        out = value
    elif key.kind == "path":
        if not value:
            raise ConfigError(f"key {name!r} needs a non-empty path")
        out = value
    elif key.kind == "int":
        try:
            out = int(value)
        except ValueError:
            raise ConfigError(f"key {name!r} needs an integer, got {value!r}") from None
    elif key.kind == "float":
        try:
            out = float(value)
        except ValueError:
            raise ConfigError(f"key {name!r} needs a number, got {value!r}") from None
    elif key.kind == "bool":
        if value not in ("true", "false"):
            raise ConfigError(f"key {name!r} needs true or false, got {value!r}")
        out = value == "true"
    else:
        raise AssertionError(f"unhandled key kind {key.kind!r}")
    if key.choices is not None and out not in key.choices:
        raise ConfigError(
            f"key {name!r} must be one of {', '.join(key.choices)}; got {value!r}"
        )
    return out


def resolve(raw: dict[str, str], schema: dict[str, Key]) -> dict[str, object]:
    """Typed values for every schema key, defaults filled in.

    Keys outside the schema are unknown and rejected; required keys must
    be present. Optional keys whose default is None stay None when absent.
    """
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    resolved: dict[str, object] = {}
    for name, key in schema.items():
        if name in raw:
            resolved[name] = _convert(name, raw[name], key)
        elif key.required:
            raise ConfigError(f"missing required config key {name!r}")
        else:
            resolved[name] = key.default
    return resolved


def canonical_text(resolved: dict[str, object]) -> str:
    """One-line deterministic rendering: sorted `key=value` pairs.

    None-valued keys are omitted; booleans render as true/false; floats
    use repr, the shortest round-trip form.
    """
    parts = []
    for name in sorted(resolved):
        value = resolved[name]
        if value is None:
            continue
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        parts.append(f"{name}={text}")
    return " ".join(parts)
