"""Flat ``key = value`` configuration with CLI override semantics."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

__all__ = ["Settings", "load_settings", "DEFAULTS"]

DEFAULTS = {
    "quadrature.rel_tol": 1e-9,
    "ou.lambda": 1.0,
    "ou.sigma": 1.0,
    "ou.burn_in_factor": 10.0,
    "budget.order4": 2.0e11,
    "threads": 0,
}

_DEFAULT_FILENAME = "rosenblatt.cfg"


def _parse_scalar(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


@dataclass
class Settings:
    """Resolved configuration: defaults < file < explicit overrides."""

    values: dict = field(default_factory=dict)

    def get(self, key: str, default=None):
        if key in self.values:
            return self.values[key]
        if key in DEFAULTS:
            return DEFAULTS[key]
        return default

    def override(self, key: str, value) -> None:
        if value is not None:
            self.values[key] = value


def load_settings(path: str | None = None) -> Settings:
    """Read the flat config file; a missing default file is not an error."""
    settings = Settings(values=dict())
    candidate = path or _DEFAULT_FILENAME
    if path is None and not os.path.exists(candidate):
        return settings
    with open(candidate) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{candidate}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            settings.values[key.strip()] = _parse_scalar(val)
    return settings
