"""Key-value configuration files mirroring the CLI flags.

Format: one ``key = value`` pair per line, ``#`` starts a comment, blank
lines are ignored. Keys use the long option names with underscores
(e.g. ``min_distance = 5.0``). Values given on the command line override
the file; the file overrides built-in defaults.
"""

from __future__ import annotations

from pathlib import Path


def load_config(path: str | Path) -> dict[str, str]:
    config: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = line.split("=", 1)
            key = key.strip()
            value = value.strip()
            if not key or not value:
                raise ValueError(f"{path}:{lineno}: empty key or value")
            config[key] = value
    return config


def resolve(cli_value, config: dict[str, str], key: str, default, cast=float):
    """Pick the effective option value: CLI flag, then config file, then default."""
    if cli_value is not None:
        return cli_value
    if key in config:
        raw = config[key]
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default
