"""Run configuration: defaults, JSON config file, ``TMEV_CONFIG`` override."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields
from typing import Optional

ENV_VAR = "TMEV_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    depth: int = 3
    unroll: int = 1
    fee_bps: int = 0
    budget: Optional[int] = None
    value_residual_y: bool = False
    seed: int = 0
    window: int = 16
    max_evals: int = 5000

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.depth < 1:
            raise ConfigError("depth must be >= 1")
        if self.unroll < 1:
            raise ConfigError("unroll must be >= 1")
        if not 0 <= self.fee_bps < 10_000:
            raise ConfigError("fee_bps must be in [0, 10000)")
        if self.budget is not None and self.budget < 0:
            raise ConfigError("budget must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.window < 1:
            raise ConfigError("window must be >= 1")

    def to_json(self):
        return asdict(self)


def config_from_dict(doc, base=None):
    base = base or Config()
    known = {f.name for f in fields(Config)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = {**asdict(base), **doc}
    for k, v in merged.items():
        if k == "value_residual_y":
            if not isinstance(v, bool):
                raise ConfigError("value_residual_y must be true or false")
        elif k == "budget" and v is None:
            continue
        elif isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{k} must be an integer")
    return Config(**merged)


def load_config(path=None, env=None):
    """Defaults, overridden by the file named in ``TMEV_CONFIG`` (or ``path``)."""
    env = os.environ if env is None else env
    path = path or env.get(ENV_VAR)
    if not path:
        return Config()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return config_from_dict(doc)
