"""Run configuration: defaults, validation, and the flat config-file format.

The file format is deliberately plain: one ``key = value`` per line, ``#``
comments, no sections. Unknown keys are rejected so a typo cannot silently
fall back to a default. Command-line overrides are applied after the file.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigError
from .sampling import STRATEGIES
from .wavelet import MAX_SCALES, default_kernel_sizes

SETTINGS = ("transductive", "inductive")

_TRUE_WORDS = frozenset({"true", "yes", "on", "1"})
_FALSE_WORDS = frozenset({"false", "no", "off", "0"})


@dataclass(frozen=True)
class RunConfig:
    """Everything a training or evaluation run needs besides the data."""

    length: int = 32
    d: int = 64
    heads: int = 2
    n_layers: int = 2
    kernel_sizes: tuple = (1, 3, 5)
    tau: float = 1.0
    lam: float = 1e-5
    lr: float = 1e-3
    batch_size: int = 200
    epochs: int = 50
    seed: int = 42
    dropout: float = 0.0
    patience: int = 5
    setting: str = "transductive"
    strategy: str = "random"
    train_frac: float = 0.70
    val_frac: float = 0.15
    inductive_fraction: float = 0.10
    masked_pool: bool = False
    disable_temporal: bool = False
    disable_frequency: bool = False

    @property
    def m(self):
        return len(self.kernel_sizes)


def validate(cfg):
    """Raise ConfigError on the first violated invariant; return cfg."""
    if cfg.d < 2 or cfg.d % 2 != 0:
        raise ConfigError(f"d must be a positive even integer, got {cfg.d}")
    if cfg.heads < 1 or cfg.d % cfg.heads != 0:
        raise ConfigError(f"heads must divide d, got d={cfg.d} heads={cfg.heads}")
    if cfg.n_layers < 1:
        raise ConfigError(f"n_layers must be at least 1, got {cfg.n_layers}")
    if cfg.length < 1:
        raise ConfigError(f"length must be at least 1, got {cfg.length}")
    if not 1 <= len(cfg.kernel_sizes) <= MAX_SCALES:
        raise ConfigError(
            f"between 1 and {MAX_SCALES} kernel sizes are supported, "
            f"got {len(cfg.kernel_sizes)}"
        )
    if any(k < 1 for k in cfg.kernel_sizes):
        raise ConfigError(f"kernel sizes must be positive, got {cfg.kernel_sizes}")
    if cfg.tau <= 0:
        raise ConfigError(f"tau must be positive, got {cfg.tau}")
    if cfg.lam < 0:
        raise ConfigError(f"lam must be non-negative, got {cfg.lam}")
    if cfg.lr <= 0:
        raise ConfigError(f"lr must be positive, got {cfg.lr}")
    if cfg.batch_size < 1:
        raise ConfigError(f"batch_size must be at least 1, got {cfg.batch_size}")
    if cfg.epochs < 0:
        raise ConfigError(f"epochs must be non-negative, got {cfg.epochs}")
    if cfg.patience < 1:
        raise ConfigError(f"patience must be at least 1, got {cfg.patience}")
    if not 0.0 <= cfg.dropout < 1.0:
        raise ConfigError(f"dropout must lie in [0, 1), got {cfg.dropout}")
    if cfg.setting not in SETTINGS:
        raise ConfigError(f"setting must be one of {SETTINGS}, got {cfg.setting!r}")
    if cfg.strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {STRATEGIES}, got {cfg.strategy!r}")
    if not (0.0 < cfg.train_frac < 1.0 and 0.0 < cfg.val_frac < 1.0):
        raise ConfigError(
            f"split fractions must lie in (0, 1), got "
            f"train={cfg.train_frac} val={cfg.val_frac}"
        )
    if cfg.train_frac + cfg.val_frac >= 1.0:
        raise ConfigError(
            "train_frac + val_frac must leave room for a test partition, "
            f"got {cfg.train_frac} + {cfg.val_frac}"
        )
    if not 0.0 < cfg.inductive_fraction < 1.0:
        raise ConfigError(
            f"inductive_fraction must lie in (0, 1), got {cfg.inductive_fraction}"
        )
    return cfg


def _parse_bool(text, key, lineno):
    word = text.lower()
    if word in _TRUE_WORDS:
        return True
    if word in _FALSE_WORDS:
        return False
    raise ConfigError(f"line {lineno}: {key} expects true/false, got {text!r}")


def _parse_kernel_sizes(text, lineno):
    try:
        return tuple(int(part.strip()) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(
            f"line {lineno}: kernel_sizes expects comma-separated integers, "
            f"got {text!r}"
        ) from None


def read_config_file(path):
    """Parse a flat ``key = value`` file into a {field: value} dict.

    Accepts every RunConfig field plus the shorthand ``m = N`` (expanded to
    the default kernel ladder). Unknown keys, duplicate keys, and malformed
    values raise ConfigError with the offending line number.
    """
    field_types = {f.name: f.type for f in fields(RunConfig)}
    parsed = {}
    saw_m = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key == "m":
                try:
                    saw_m = int(value)
                except ValueError:
                    raise ConfigError(f"line {lineno}: m expects an integer, got {value!r}") from None
                continue
            if key not in field_types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in parsed:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            if key == "kernel_sizes":
                parsed[key] = _parse_kernel_sizes(value, lineno)
                continue
            kind = field_types[key]
            try:
                if kind in ("bool", bool):
                    parsed[key] = _parse_bool(value, key, lineno)
                elif kind in ("int", int):
                    parsed[key] = int(value)
                elif kind in ("float", float):
                    parsed[key] = float(value)
                else:
                    parsed[key] = value
            except ConfigError:
                raise
            except ValueError:
                raise ConfigError(
                    f"line {lineno}: could not parse {key} value {value!r}"
                ) from None
    if saw_m is not None:
        if "kernel_sizes" in parsed:
            if len(parsed["kernel_sizes"]) != saw_m:
                raise ConfigError(
                    f"m = {saw_m} disagrees with kernel_sizes of length "
                    f"{len(parsed['kernel_sizes'])}"
                )
        else:
            parsed["kernel_sizes"] = tuple(default_kernel_sizes(saw_m))
    return parsed


def load_config(path=None, overrides=None):
    """Build a validated RunConfig from defaults, file, then overrides."""
    cfg = RunConfig()
    if path is not None:
        cfg = replace(cfg, **read_config_file(path))
    if overrides:
        known = {f.name for f in fields(RunConfig)}
        clean = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "m":
                clean["kernel_sizes"] = tuple(default_kernel_sizes(int(value)))
                continue
            if key not in known:
                raise ConfigError(f"unknown config override {key!r}")
            clean[key] = value
        cfg = replace(cfg, **clean)
    return validate(cfg)


def config_lines(cfg):
    """Render the effective config as ``key = value`` lines for log headers."""
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if f.name == "kernel_sizes":
            value = ",".join(str(k) for k in value)
        lines.append(f"{f.name} = {value}")
    return lines


def model_kwargs(cfg, d_e):
    """Constructor arguments for the model implied by this config."""
    return {
        "d": cfg.d,
        "d_e": d_e,
        "heads": cfg.heads,
        "n_layers": cfg.n_layers,
        "kernel_sizes": list(cfg.kernel_sizes),
        "seed": cfg.seed,
        "tau": cfg.tau,
        "lam": cfg.lam,
        "dropout": cfg.dropout,
        "masked_pool": cfg.masked_pool,
        "use_temporal": not cfg.disable_temporal,
        "use_frequency": not cfg.disable_frequency,
    }
