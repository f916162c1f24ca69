"""Line-oriented ``key = value`` experiment configuration files.

Blank lines and ``#`` comments are ignored.  Values are parsed according to
the type of the field's default; tuples are comma-separated.
"""

import dataclasses
from dataclasses import dataclass, fields

from .exceptions import ConfigError, ParameterError
from .training import TrainConfig

DATASETS = ("two_moons", "three_spirals", "cifar10")
ARCHS = ("mlp", "convnet")


@dataclass
class ExperimentConfig:
    # TrainConfig fields
    mode: str = "ssl"
    batch_size_labeled: int = 16
    w: float = 1.0
    base_lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 5e-4
    dropout: float = 0.5
    epochs: int = 50
    lr_power: float = 0.5
    seed: int = 0
    aug_translate: int = 2
    aug_hflip: bool = True
    aug_noise: float = 0.15
    eval_every: int = 1
    # experiment fields
    dataset: str = "two_moons"
    data_path: str = ""
    data_seed: int = 0
    n_per_class: int = 500
    data_noise: float = 0.1
    num_labeled: int = 10
    train_subset: int = 0
    test_subset: int = 0
    zca_epsilon: float = 1e-2
    arch: str = "mlp"
    hidden: tuple = (100, 100, 100)
    widths: tuple = (32, 64, 128)
    dtype: str = "float32"
    grid_resolution: int = 101
    output_dir: str = "runs/default"

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ParameterError(f"dataset must be one of {DATASETS}, got {self.dataset!r}")
        if self.arch not in ARCHS:
            raise ParameterError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        self.train_config()

    def train_config(self):
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def to_text(self):
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(raw, default):
    if isinstance(default, bool):
        low = raw.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(int(v) for v in raw.split(",") if v.strip())
    return raw


def parse_config(text):
    defaults = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        key, sep, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'key = value', got {line.strip()!r}", lineno)
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            values[key] = _parse(raw, getattr(defaults, key))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from exc
    try:
        return ExperimentConfig(**values)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
