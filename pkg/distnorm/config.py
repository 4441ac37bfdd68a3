"""
Run-wide configuration.

Components accept an optional options mapping that is overlaid on
``DEFAULT_SETTINGS``; environment variables are read once by
:meth:`Settings.from_env`.
"""

from __future__ import annotations

import os
from typing import Any, Dict, Mapping, Optional

from attrs import asdict, define, field, validators

from .errors import ConfigError

DEFAULT_SETTINGS: Dict[str, Any] = {
    "threads": 1,
    "dim_cap": 4096,
    "hermitian_tol": 1e-10,
    "povm_tol": 1e-9,
    "design_tol": 1e-9,
    "chunk_size": 8192,
    "min_tol": 1e-12,
}

TOLERANCE_KEYS = ("hermitian_tol", "povm_tol", "design_tol")


def _positive(instance, attribute, value):
    if value <= 0:
        raise ConfigError(f"{attribute.name} must be positive, got {value!r}")


@define(frozen=True)
class Settings:
    threads: int = field(default=DEFAULT_SETTINGS["threads"], converter=int, validator=_positive)
    dim_cap: int = field(default=DEFAULT_SETTINGS["dim_cap"], converter=int, validator=_positive)
    hermitian_tol: float = field(default=DEFAULT_SETTINGS["hermitian_tol"], converter=float)
    povm_tol: float = field(default=DEFAULT_SETTINGS["povm_tol"], converter=float)
    design_tol: float = field(default=DEFAULT_SETTINGS["design_tol"], converter=float)
    chunk_size: int = field(default=DEFAULT_SETTINGS["chunk_size"], converter=int, validator=_positive)
    min_tol: float = field(default=DEFAULT_SETTINGS["min_tol"], converter=float,
                           validator=validators.gt(0.0))

    def __attrs_post_init__(self):
        for key in TOLERANCE_KEYS:
            value = getattr(self, key)
            if value < self.min_tol:
                raise ConfigError(f"{key}={value!r} is below the floor {self.min_tol!r}")

    @classmethod
    def from_mapping(cls, options: Optional[Mapping[str, Any]] = None) -> "Settings":
        """
        Overlay an options mapping on the defaults.

        Args:
            options: Keys from ``DEFAULT_SETTINGS``; unknown keys are rejected.

        Returns:
            A validated ``Settings``.
        """
        merged = dict(DEFAULT_SETTINGS)
        for key, value in (options or {}).items():
            if key not in DEFAULT_SETTINGS:
                raise ConfigError(f"unknown setting {key!r}")
            merged[key] = value
        return cls(**merged)

    @classmethod
    def from_env(cls, overrides: Optional[Mapping[str, Any]] = None) -> "Settings":
        options: Dict[str, Any] = {"threads": _env_threads()}
        cap = os.environ.get("DISTNORM_DIM_CAP")
        if cap:
            options["dim_cap"] = _env_int("DISTNORM_DIM_CAP", cap)
        options.update(overrides or {})
        return cls.from_mapping(options)

    def replace(self, **changes: Any) -> "Settings":
        return Settings.from_mapping({**asdict(self), **changes})


def _env_int(name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc


def _env_threads() -> int:
    raw = os.environ.get("DISTNORM_THREADS")
    if raw:
        return max(1, _env_int("DISTNORM_THREADS", raw))
    return max(1, os.cpu_count() or 1)


_current = Settings()


def get_settings() -> Settings:
    return _current


def set_settings(settings: Settings) -> Settings:
    """Install ``settings`` as the process default and return the previous one."""
    global _current
    previous, _current = _current, settings
    return previous


def resolve(config: Optional[Mapping[str, Any]] = None) -> Settings:
    """Settings for a component: the process default overlaid with ``config``."""
    if not config:
        return _current
    return _current.replace(**dict(config))
