"""
Experiment configuration: a versioned JSON document.

Example::

    {"schema_version": 1, "experiment": "figure4",
     "model": {"bulk": {"kind": "zero"}, "spikes": [5.0]},
     "dynamics": "additive", "N": 200, "beta": 1,
     "times": [0, 2.5, 5, 10, 15, 20], "n_samples": 100, "seed": 1,
     "output_dir": "out/fig4", "params": {}}
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..spectral_model import SpectralModel

__all__ = ["ExperimentConfig", "EXPERIMENTS", "SCHEMA_VERSION", "load_config", "config_hash"]

SCHEMA_VERSION = 1
EXPERIMENTS = ("density", "paths", "overlaps-bulk", "overlaps-crossover", "spike", "clt",
               "figure2", "figure3", "figure4")
_FIELDS = ("schema_version", "experiment", "model", "dynamics", "N", "beta", "times",
           "n_samples", "seed", "output_dir", "params")


def _field_error(name, msg):
    return ConfigError(f"config field '{name}': {msg}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment settings. ``params`` holds experiment-specific knobs."""

    experiment: str
    model: SpectralModel
    dynamics: str = "additive"
    N: int = 100
    beta: int = 1
    times: tuple = (1.0,)
    n_samples: int = 100
    seed: int = 0
    output_dir: str = "out"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise _field_error("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
        if self.dynamics not in ("additive", "ou"):
            raise _field_error("dynamics", "must be 'additive' or 'ou'")
        for name in ("N", "n_samples"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise _field_error(name, f"must be a positive integer, got {v!r}")
        if self.beta not in (1, 2):
            raise _field_error("beta", "must be 1 or 2")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or self.seed < 0:
            raise _field_error("seed", "must be a non-negative integer")
        try:
            times = tuple(float(t) for t in self.times)
        except (TypeError, ValueError):
            raise _field_error("times", "must be a list of numbers") from None
        if not times:
            raise _field_error("times", "must not be empty")
        if any(not np.isfinite(t) or t < 0 for t in times):
            raise _field_error("times", "must be finite and non-negative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise _field_error("times", "must be strictly increasing")
        object.__setattr__(self, "times", times)
        if not isinstance(self.params, dict):
            raise _field_error("params", "must be an object")

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "model": self.model.to_dict(),
            "dynamics": self.dynamics,
            "N": int(self.N),
            "beta": int(self.beta),
            "times": list(self.times),
            "n_samples": int(self.n_samples),
            "seed": int(self.seed),
            "output_dir": str(self.output_dir),
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - set(_FIELDS)
        if unknown:
            raise _field_error(sorted(unknown)[0], "unknown field")
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise _field_error("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
        for name in ("experiment", "model"):
            if name not in d:
                raise _field_error(name, "missing")
        try:
            model = SpectralModel.from_dict(d["model"])
        except ConfigError as exc:
            raise _field_error("model", str(exc)) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise _field_error("model", f"malformed ({exc})") from None
        kw = {k: d[k] for k in ("dynamics", "N", "beta", "times", "n_samples", "seed",
                                "output_dir", "params") if k in d}
        return cls(experiment=d["experiment"], model=model, **kw)

    @property
    def hash(self) -> str:
        return config_hash(self)


def config_hash(cfg: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON of the config, ``output_dir`` excluded."""
    d = cfg.to_dict()
    d.pop("output_dir")
    text = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return ExperimentConfig.from_dict(d)
