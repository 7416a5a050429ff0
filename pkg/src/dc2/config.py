"""Pipeline settings: defaults, overridden by a TOML file, overridden by flags.

Credentials are read from the environment only. Values are range-checked
when loaded; library callers constructing a config directly may step
outside the ranges (e.g. ``alpha > 1`` to disable retrieval).
"""
from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, fields
from typing import Any, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .backend.http import API_KEY_ENV


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    patch_size: int = 336
    theta: float = 0.1
    alpha: float = 0.3
    max_depth: int = 4
    nms_threshold: float = 0.5
    top_k: int = 3
    temperature: float = 0.2
    leaf_prompt: int = 1
    backend: str = "mock"
    model: str = "default"
    text_model: Optional[str] = None
    base_url: str = "http://localhost:8000/v1"
    text_base_url: Optional[str] = None
    timeout: float = 120.0
    max_retries: int = 4
    concurrency: int = 4
    workers: int = 1
    cache_dir: Optional[str] = None
    mock_scenes: Optional[str] = None
    mock_latency: float = 0.0

    def validate(self) -> "PipelineConfig":
        checks = [
            ("patch_size", self.patch_size >= 1, ">= 1"),
            ("theta", self.theta >= 0, ">= 0"),
            ("alpha", 0.0 <= self.alpha <= 1.0, "in [0, 1]"),
            ("max_depth", self.max_depth >= 0, ">= 0"),
            ("nms_threshold", 0.0 <= self.nms_threshold <= 1.0, "in [0, 1]"),
            ("top_k", self.top_k >= 0, ">= 0"),
            ("temperature", self.temperature >= 0, ">= 0"),
            ("leaf_prompt", self.leaf_prompt in (1, 2, 3, 4, 5), "one of 1..5"),
            ("backend", self.backend in ("http", "mock"), "'http' or 'mock'"),
            ("concurrency", self.concurrency >= 1, ">= 1"),
            ("workers", self.workers >= 1, ">= 1"),
            ("max_retries", self.max_retries >= 0, ">= 0"),
            ("mock_latency", self.mock_latency >= 0, ">= 0"),
        ]
        for key, ok, rule in checks:
            if not ok:
                raise ConfigError(f"{key}={getattr(self, key)!r} is invalid: must be {rule}")
        return self

    def replace(self, **changes: Any) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, value: Any) -> Any:
    kind = _TYPES[key]
    if value is None:
        if "Optional" in str(kind):
            return None
        raise ConfigError(f"{key} may not be empty")
    try:
        if kind == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if kind == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}={value!r} has the wrong type (expected {kind})") from None


def load_config(
    path: Optional[os.PathLike | str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> PipelineConfig:
    values: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                values.update(tomllib.load(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"bad config file {path}: {exc}") from None
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    unknown = sorted(set(values) - set(_TYPES))
    if unknown:
        raise ConfigError(f"unknown config key(s) {', '.join(unknown)}; valid keys: {', '.join(sorted(_TYPES))}")
    return PipelineConfig(**{k: _coerce(k, v) for k, v in values.items()}).validate()


def api_key(environ: Optional[Mapping[str, str]] = None) -> Optional[str]:
    env = os.environ if environ is None else environ
    return env.get(API_KEY_ENV)
