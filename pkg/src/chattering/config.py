"""Flat ``key = value`` run configuration."""

from __future__ import annotations

from pathlib import Path

DEFAULTS = {
    "z1": "0.5",
    "exponents": "squares",
    "K": 6,
    "precision_bits": 128,
    "L": 6,
    "T": 1.0,
    "samples": 2000,
    "grid": 2001,
    "l_list": None,
    "root_sampling": 64,
    "t_grid": 10_000,
    "control_samples": 100,
    "mode_tol": 1e-6,
    "oracle_nx": 2001,
    "oracle_nt": 2000,
    "seed": 0,
    "sequence": "sequence.json",
    "out": None,
}

_TYPES = {
    "K": int,
    "precision_bits": int,
    "L": int,
    "T": float,
    "samples": int,
    "grid": int,
    "root_sampling": int,
    "t_grid": int,
    "control_samples": int,
    "mode_tol": float,
    "oracle_nx": int,
    "oracle_nt": int,
    "seed": int,
}


class ConfigError(ValueError):
    pass


def coerce(key: str, value):
    if value is None:
        return None
    if key not in DEFAULTS:
        raise ConfigError(f"unknown configuration key {key!r}")
    try:
        return _TYPES.get(key, str)(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def read_config(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = coerce(key, value)
    return out


def resolve(config_path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the config file, then explicit command-line values."""
    cfg = dict(DEFAULTS)
    if config_path is not None:
        cfg.update(read_config(config_path))
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg[k] = coerce(k, v)
    return cfg
