"""Namespaced run configuration: JSON documents plus ``--key value`` overrides.

Keys are dotted (``recon.lambda``, ``mask.pattern``).  Noise levels
(``prior.sigma_eta``, ``recon.sigma_eta``) are given on the 0-255 scale and
divided by 255 when used, so ``20`` means 20/255 of the unit intensity range.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .errors import ConfigError

__all__ = ["DEFAULTS", "RunConfig", "parse_dims", "parse_list"]

DEFAULTS: dict[str, object] = {
    "wavelet.name": "haar",
    "mask.pattern": "radial",
    "mask.r": 4.0,
    "mask.dims": "64x64",
    "mask.seed": 0,
    "mask.center_fraction": 0.08,
    "mask.decay_power": 2.0,
    "phantom.dims": "64x64",
    "phantom.n_ellipses": 8,
    "phantom.count": 1,
    "phantom.seed": 0,
    "encode.noise_std": 0.0,
    "encode.seed": 0,
    "prior.width": 16,
    "prior.blocks": 1,
    "prior.block_depth": 2,
    "prior.tail_layers": 1,
    "prior.sigma_eta": 20.0,
    "train.n_images": 60,
    "train.image_dims": "64x64",
    "train.data_seed": 0,
    "train.patch_size": 16,
    "train.stride": 4,
    "train.max_patches": 2000,
    "train.batch_size": 32,
    "train.epochs": 15,
    "train.learning_rate": 1e-3,
    "train.seed": 0,
    "recon.lambda": 0.1,
    "recon.beta": 1.0,
    "recon.iterations": 100,
    "recon.sigma_eta": None,
    "recon.noise_mode": "fresh_noise",
    "recon.seed": 0,
    "recon.stop_tol": 1e-5,
    "sweep.axis": "lambda",
    "sweep.values": "0.01,0.05,0.1,0.5,1",
    "sweep.checkpoints": None,
    "inspect.layer": 0,
    "io.out": None,
    "io.image": None,
    "io.kspace": None,
    "io.mask": None,
    "io.ref": None,
    "io.img": None,
    "io.data": None,
    "io.checkpoint": None,
    "io.trace": None,
    "io.pgm": None,
}

# keys whose default is None but which hold numbers when set
_NUMERIC_OPTIONAL = {"recon.sigma_eta"}


def parse_dims(value) -> tuple[int, int]:
    """``"64x48"``, ``[64, 48]`` or ``64`` -> (64, 48)."""
    try:
        if isinstance(value, int):
            dims = (value, value)
        elif isinstance(value, str):
            parts = value.lower().split("x")
            dims = (int(parts[0]), int(parts[-1])) if len(parts) <= 2 else None
        else:
            dims = tuple(int(v) for v in value)
    except (TypeError, ValueError):
        dims = None
    if dims is None or len(dims) != 2 or min(dims) < 1:
        raise ConfigError(f"dims must look like 64x64, got {value!r}")
    return dims


def parse_list(value) -> list:
    if isinstance(value, (list, tuple)):
        return list(value)
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [value]


def _coerce(key: str, value):
    default = DEFAULTS[key]
    if value is None:
        return None
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if isinstance(value, str):
            try:
                value = int(value)
            except ValueError:
                pass
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return value
    if isinstance(default, float) or key in _NUMERIC_OPTIONAL:
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {value!r}") from None
    if key == "sweep.values" and isinstance(value, (list, tuple)):
        return list(value)
    if key.endswith("dims") and isinstance(value, (list, tuple, int)):
        return "x".join(str(d) for d in parse_dims(value))
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def _flatten(doc: dict, prefix: str = "") -> dict:
    flat = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            flat.update(_flatten(v, key + "."))
        else:
            flat[key] = v
    return flat


class RunConfig:
    """Resolved key/value settings for one command invocation."""

    def __init__(self, values: dict | None = None, command: str | None = None):
        self.command = command
        self._values = dict(DEFAULTS)
        self.update(values or {})

    @classmethod
    def from_file(cls, path, command: str | None = None) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        doc = dict(doc)
        stored = doc.pop("command", None)
        if command and stored and stored != command:
            raise ConfigError(f"{path} was written by '{stored}', not '{command}'")
        return cls(doc, command or stored)

    def update(self, values: dict) -> "RunConfig":
        for key, value in _flatten(values).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            self._values[key] = _coerce(key, value)
        return self

    def __getitem__(self, key: str):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        return self._values[key]

    def get(self, key: str, default=None):
        value = self[key]
        return default if value is None else value

    def require(self, key: str):
        value = self[key]
        if value is None:
            raise ConfigError(f"missing required setting {key!r} (pass --{key.split('.')[-1]} or --{key})")
        return value

    def as_dict(self) -> dict:
        nested: dict = {}
        for key, value in sorted(self._values.items()):
            node = nested
            *parents, leaf = key.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = copy.deepcopy(value)
        if self.command:
            nested = {"command": self.command, **nested}
        return nested

    def dumps(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=False) + "\n"

    def write(self, path) -> None:
        from .io import atomic_path

        with atomic_path(path) as tmp:
            tmp.write_text(self.dumps())

    def __eq__(self, other):
        return isinstance(other, RunConfig) and self.as_dict() == other.as_dict()

    def __repr__(self):
        return f"RunConfig(command={self.command!r})"
