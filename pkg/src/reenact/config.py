"""Project configuration: one versioned YAML tree driving every CLI command."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .conditioning import WINDOW_SIZE
from .transfer import TransferSpec

CONFIG_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent project configuration."""


@dataclass
class PathsConfig:
    frames_dir: str | None = None
    landmarks_dir: str | None = None
    output_dir: str = "out"


@dataclass
class CameraConfig:
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ConfigError("camera dimensions must be positive")


@dataclass
class BasisConfig:
    seed: int = 7
    vertex_count: int = 512
    dims: tuple = (80, 80, 64)

    def __post_init__(self):
        if self.vertex_count < 10:
            raise ConfigError("vertex count too small")
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ConfigError("basis dims must be three positive integers")


@dataclass
class SolverConfigSection:
    w_photo: float = 1.0
    w_land: float = 2000.0
    w_reg: float = 0.05
    max_iters: int = 7

    def __post_init__(self):
        if min(self.w_photo, self.w_land, self.w_reg) < 0 or self.max_iters < 1:
            raise ConfigError("solver weights must be non-negative, iters positive")


@dataclass
class TrainSection:
    lambda_l1: float = 100.0
    batch_size: int = 4
    iterations: int = 1000
    learning_rate: float = 0.0002
    first_momentum: float = 0.5
    shuffle_seed: int = 0
    weights_seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.iterations < 0 or self.learning_rate <= 0:
            raise ConfigError("invalid training settings")


@dataclass
class ServiceSection:
    host: str = "127.0.0.1"
    port: int = 8099

    def __post_init__(self):
        if not 0 < self.port < 65536:
            raise ConfigError("service port out of range")


@dataclass
class ProjectConfig:
    version: int = CONFIG_VERSION
    paths: PathsConfig = field(default_factory=PathsConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    basis: BasisConfig = field(default_factory=BasisConfig)
    solver: SolverConfigSection = field(default_factory=SolverConfigSection)
    window_size: int = WINDOW_SIZE
    train: TrainSection = field(default_factory=TrainSection)
    transfer: TransferSpec = field(default_factory=TransferSpec)
    service: ServiceSection = field(default_factory=ServiceSection)

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if self.window_size < 1:
            raise ConfigError("window size must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["basis"]["dims"] = list(self.basis.dims)
        d["transfer"] = self.transfer.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectConfig":
        d = dict(d)
        try:
            return cls(
                version=d.get("version", CONFIG_VERSION),
                paths=PathsConfig(**d.get("paths", {})),
                camera=CameraConfig(**d.get("camera", {})),
                basis=_basis_from(d.get("basis", {})),
                solver=SolverConfigSection(**d.get("solver", {})),
                window_size=d.get("window_size", WINDOW_SIZE),
                train=TrainSection(**d.get("train", {})),
                transfer=TransferSpec.from_dict(d.get("transfer", {})),
                service=ServiceSection(**d.get("service", {})),
            )
        except TypeError as exc:
            raise ConfigError(f"unknown config field: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _basis_from(d: dict) -> BasisConfig:
    d = dict(d)
    if "dims" in d:
        d["dims"] = tuple(int(v) for v in d["dims"])
    return BasisConfig(**d)


def load_config(path, check_paths: bool = True) -> ProjectConfig:
    """Parse and validate a config file; input directories must exist."""
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    config = ProjectConfig.from_dict(doc)
    if check_paths:
        for name in ("frames_dir", "landmarks_dir"):
            value = getattr(config.paths, name)
            if value is not None and not Path(value).is_dir():
                raise ConfigError(f"{name} does not exist: {value}")
    return config


def save_config(config: ProjectConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=True)
