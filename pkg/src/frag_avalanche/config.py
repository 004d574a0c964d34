"""Run configuration: an INI file with ``[model]``, ``[run]`` and ``[output]``.

Command-line flags override file values; the seed falls back to the
``FRAG_AVALANCHE_SEED`` environment variable and then to a built-in default.
Unknown sections or keys are errors.  See ``docs/config.md`` for the keys.
"""
from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, fields
from typing import Any

from .errors import ConfigError
from .kernels import ClipPolicy
from .model import ModelParams, geometric_thresholds, make_params

SEED_ENV = "FRAG_AVALANCHE_SEED"
DEFAULT_SEED = 20240917


def _floats(text: str) -> tuple[float, ...]:
    parts = [p.strip() for p in text.replace(";", ",").split(",") if p.strip()]
    try:
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.replace(";", ",").split(",") if p.strip())
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from exc


def _opt_int(text: str) -> int | None:
    return None if text.strip().lower() in ("", "none") else int(text)


@dataclass
class RunConfig:
    # [model]
    r: float = 0.5
    thresholds: str = "geometric:4"
    depth: int = 2
    # [run]
    x0: float = 1.0
    sizes: tuple[float, ...] = ()
    level: int | None = None
    t_end: float = 1.0
    replicas: int = 1000
    seed: int | None = None
    clip_policy: str = "edge"
    workers: int | None = None
    cap: int = 10**6
    quantity: str = "transition"
    alpha: float = 1.0
    function: str = "one"
    tol: float = 1e-12
    cumulant_tol: float = 1e-8
    unbanded: bool = False
    tol_scale: float = 1.0
    only: tuple[int, ...] = ()
    # [output]
    out: str | None = None
    events: bool = True
    quiet: bool = False

    SECTIONS = {
        "model": ("r", "thresholds", "depth"),
        "run": ("x0", "sizes", "level", "t_end", "replicas", "seed", "clip_policy", "workers", "cap",
                "quantity", "alpha", "function", "tol", "cumulant_tol", "unbanded", "tol_scale", "only"),
        "output": ("out", "events", "quiet"),
    }

    # -- derived ---------------------------------------------------------------

    def threshold_values(self) -> tuple[float, ...]:
        text = self.thresholds.strip()
        if text.startswith("geometric:"):
            try:
                base = float(text.split(":", 1)[1])
            except ValueError as exc:
                raise ConfigError(f"bad threshold rule {text!r}") from exc
            return geometric_thresholds(base, self.depth)
        return _floats(text)

    def params(self) -> ModelParams:
        return make_params(self.r, self.threshold_values())

    def policy(self) -> ClipPolicy:
        try:
            return ClipPolicy.parse(self.clip_policy)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def resolved_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        env = os.environ.get(SEED_ENV, "").strip()
        if env:
            try:
                return int(env, 0)
            except ValueError as exc:
                raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
        return DEFAULT_SEED

    # -- (de)serialization -------------------------------------------------------

    def set(self, key: str, raw: Any) -> None:
        """Set ``key`` from a string (file value) or an already typed value."""
        names = {f.name: f for f in fields(self)}
        if key not in names:
            raise ConfigError(f"unknown configuration key {key!r}")
        if not isinstance(raw, str):
            setattr(self, key, raw)
            return
        conv = {
            "r": float, "depth": int, "x0": float, "sizes": _floats, "level": _opt_int,
            "t_end": float, "replicas": int, "seed": lambda s: None if s.strip() in ("", "none") else int(s, 0),
            "workers": _opt_int, "cap": int, "alpha": float, "tol": float, "cumulant_tol": float,
            "unbanded": _bool, "tol_scale": float, "only": _ints, "events": _bool, "quiet": _bool,
            "out": lambda s: None if s.strip() in ("", "none") else s,
        }.get(key, str)
        try:
            setattr(self, key, conv(raw))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse configuration: {exc}") from exc
        cfg = cls()
        for section in parser.sections():
            if section not in cls.SECTIONS:
                raise ConfigError(f"unknown configuration section [{section}]")
            for key, value in parser.items(section):
                if key not in cls.SECTIONS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                cfg.set(key, value)
        return cfg

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_ini(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration file {path}: {exc}") from exc

    def to_ini(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        for section, keys in self.SECTIONS.items():
            parser.add_section(section)
            for key in keys:
                parser.set(section, key, _render(getattr(self, key)))
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _render(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    return str(value)


FIELD_NAMES = tuple(f.name for f in fields(RunConfig))
