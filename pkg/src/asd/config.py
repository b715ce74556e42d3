"""Flat ``key = value`` run configuration.

One schema covers every subcommand. Values are parsed by the type of the
field default; ranges and lists are comma separated. Unknown keys are
rejected so typos cannot silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .augment import OP_KINDS, AugmentationChain, AugOp
from .errors import ContractError
from .pyramid import ScaleSet

LOSS_NAMES = ("l1", "l2", "l3")

DEFAULT_AUGMENT = (
    "gauss_noise:p=0.5:sigma=0.02/0.08; channel_shuffle:p=0.5; "
    "brightness:p=0.5:delta=-0.2/0.2; contrast:p=0.5:factor=0.8/1.2; "
    "solarize:p=0.5:threshold=0.5"
)


def parse_chain(text: str, seed: int) -> AugmentationChain:
    """Parse ``kind:p=0.5:param=lo/hi; kind ...`` into a chain."""
    ops = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        kind, *fields = [s.strip() for s in chunk.split(":")]
        if kind not in OP_KINDS:
            raise ContractError(f"unknown augmentation {kind!r}")
        prob, params = 1.0, {}
        for f in fields:
            if "=" not in f:
                raise ContractError(f"bad augmentation field {f!r} in {chunk!r}")
            key, val = (s.strip() for s in f.split("=", 1))
            if key == "p":
                prob = float(val)
                continue
            lo, _, hi = val.partition("/")
            params[key] = (float(lo), float(hi or lo))
        ops.append(AugOp(kind, params, prob))
    return AugmentationChain(ops, seed)


@dataclass
class TrainConfig:
    epochs: int = 100
    warmup: int = 10
    lr: float = 1e-4
    batch_size: int = 1
    lam: float = 10.0
    length: int = 5
    patch: int = 15
    scales: tuple = (0.5, 1.0, 2.0)
    augment: str = DEFAULT_AUGMENT
    losses: tuple = LOSS_NAMES
    seed: int = 0
    r_init: float = 3.0
    dtype: str = "float32"
    tau: float = -1.0  # negative: trace-scaled default

    def validate(self) -> None:
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if not 0 <= self.warmup < self.epochs:
            raise ContractError(f"warmup {self.warmup} must lie in [0, epochs)")
        if self.batch_size != 1:
            raise ContractError("only batch_size = 1 is supported")
        if not self.lr > 0 or not self.lam > 0 or self.r_init < 0:
            raise ContractError("lr and lambda must be positive, r_init non-negative")
        bad = set(self.losses) - set(LOSS_NAMES)
        if bad or not self.losses:
            raise ContractError(f"losses must be a non-empty subset of {LOSS_NAMES}")
        if self.dtype not in ("float32", "float64"):
            raise ContractError(f"dtype must be float32 or float64, not {self.dtype}")
        ScaleSet(tuple(self.scales), self.patch)
        self.chain()

    @property
    def scale_set(self) -> ScaleSet:
        return ScaleSet(tuple(self.scales), self.patch)

    def chain(self) -> AugmentationChain:
        return parse_chain(self.augment, self.seed)

    def echo(self) -> dict:
        return {f.name: format_value(getattr(self, f.name)) for f in dataclasses.fields(self)}

    @classmethod
    def from_echo(cls, items: dict) -> "TrainConfig":
        return _build(cls, items)


@dataclass
class RunConfig(TrainConfig):
    train_dir: str = ""
    test_dir: str = ""
    normal_class: int = 0
    out_dir: str = "asd_out"
    checkpoint: str = ""
    maps_dir: str = ""
    report: str = ""
    synth_dir: str = ""
    synth_size: int = 32
    synth_bands: int = 3
    synth_family: int = 0
    synth_anomaly_count: tuple = (1, 3)
    synth_anomaly_size: tuple = (3, 6)
    synth_shape: str = "disk"
    synth_train: int = 40
    synth_test: int = 20
    synth_seed: int = 0
    threads: int = 0

    def path(self, key: str) -> Path:
        val = getattr(self, key)
        if val:
            return Path(val)
        out = Path(self.out_dir)
        return {
            "checkpoint": out / "checkpoint.asdc",
            "maps_dir": out / "maps",
            "report": out / "report.txt",
            "synth_dir": out / "data",
            "train_dir": out / "data" / "train",
            "test_dir": out / "data" / "test",
        }[key]

    def train_config(self) -> TrainConfig:
        names = {f.name for f in dataclasses.fields(TrainConfig)}
        return TrainConfig(**{k: getattr(self, k) for k in names})

    def synthetic_spec(self):
        from .data import SyntheticSpec

        return SyntheticSpec(
            size=self.synth_size,
            bands=self.synth_bands,
            family=self.synth_family,
            anomaly_count=tuple(int(v) for v in self.synth_anomaly_count),
            anomaly_size=tuple(int(v) for v in self.synth_anomaly_size),
            shape=self.synth_shape,
            n_train=self.synth_train,
            n_test=self.synth_test,
            seed=self.synth_seed,
        )


def format_value(val) -> str:
    if isinstance(val, (tuple, list)):
        return ",".join(format_value(v) for v in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def _convert(name: str, default, raw: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if default and isinstance(default[0], (int, float)):
                kind = type(default[0])
                return tuple(kind(float(s)) if kind is int else kind(s) for s in items)
            return tuple(items)
    except ValueError as exc:
        raise ContractError(f"bad value for {name}: {raw!r}") from exc
    return raw


def _build(cls, items: dict):
    defaults = {f.name: f.default for f in dataclasses.fields(cls)}
    unknown = sorted(set(items) - set(defaults))
    if unknown:
        raise ContractError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {k: _convert(k, defaults[k], v) for k, v in items.items()}
    return cls(**kwargs)


def parse_text(text: str, origin: str = "<config>") -> dict:
    items = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"{origin}:{lineno}: expected 'key = value'")
        key, val = line.split("=", 1)
        items[key.strip()] = val.strip()
    return items


def load_run_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read ``path`` (optional), apply ``overrides`` and validate."""
    items = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            from .errors import DataIOError

            raise DataIOError(f"config file not found: {path}")
        items.update(parse_text(path.read_text(), str(path)))
    items.update(overrides or {})
    cfg = _build(RunConfig, items)
    cfg.validate()
    return cfg
