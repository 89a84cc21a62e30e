"""
Experiment Service for STRADDLE_BENCH
Runs every initialiser R times on one shared data split and logs per-epoch losses
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import json5
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from config.settings import Settings

from .data import (
    Dataset,
    Split,
    generate_synthetic,
    load_csv,
    load_mnist_idx,
    minmax_scale,
    scale_pair,
    split,
)
from .errors import ConfigError, DataFormatError
from .initialisers import BENCHMARK_INITIALISERS, InitialiserSpec, parse_initialiser
from .network import DEFAULT_HIDDEN, build_autoencoder, evaluate, train_epoch
from .numerics import Rng

logger = logging.getLogger(__name__)

DIVERGED_LOSS = math.inf


class DatasetConfig(BaseModel):
    """Where the data of one experiment comes from"""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["synthetic", "mnist", "csv"]

    # synthetic
    records: int = Field(default=5000, ge=1)
    latent_dim: int = Field(default=20, ge=1)
    features: int = Field(default=100, ge=1)
    seed: int = Field(default=0, ge=0)

    # mnist
    images_path: Optional[Union[str, List[str]]] = None
    test_images_path: Optional[str] = None
    use_original_split: bool = False
    limit: Optional[int] = Field(default=None, ge=2)

    # csv
    path: Optional[str] = None
    drop_columns: List[str] = Field(default_factory=list)


class ExperimentConfig(BaseModel):
    """Shared hyper-parameters; every initialiser of an experiment trains with exactly these"""

    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    dataset: DatasetConfig
    split_fraction: float = Field(default=0.8, gt=0, lt=1)
    split_seed: int = Field(default=0, ge=0)
    batch_size: Union[Literal["full"], int] = "full"
    epochs: int = Field(ge=1)
    learning_rate: float = Field(default=0.1, gt=0)
    runs: int = Field(default=10, ge=1)
    base_seed: int = Field(default=0, ge=0)
    convergence_epsilon: float = Field(gt=0)
    convergence_alpha: int = Field(ge=1)
    initialisers: List[InitialiserSpec] = Field(default_factory=lambda: list(BENCHMARK_INITIALISERS))
    hidden: List[int] = Field(default_factory=lambda: list(DEFAULT_HIDDEN))
    workers: Optional[int] = Field(default=None, ge=1)

    @field_validator("initialisers", mode="before")
    @classmethod
    def _parse_initialisers(cls, value):
        if isinstance(value, list):
            return [parse_initialiser(item) for item in value]
        return value

    @field_validator("batch_size")
    @classmethod
    def _positive_batch(cls, value):
        if value != "full" and value < 1:
            raise ValueError("batch_size must be a positive integer or 'full'")
        return value

    @field_validator("hidden")
    @classmethod
    def _positive_hidden(cls, value):
        if not value or any(size < 1 for size in value):
            raise ValueError("hidden must list at least one positive layer size")
        return value

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.convergence_alpha >= self.epochs:
            raise ValueError(
                f"convergence_alpha ({self.convergence_alpha}) must be smaller than epochs ({self.epochs})"
            )
        if not self.initialisers:
            raise ValueError("at least one initialiser is required")
        names = [spec.name for spec in self.initialisers]
        if len(set(names)) != len(names):
            raise ValueError(f"initialiser names must be unique, got {names}")
        return self

    @property
    def batch_rows(self) -> Optional[int]:
        """Rows per update, None for full batch"""
        return None if self.batch_size == "full" else int(self.batch_size)


@dataclass
class RunLog:
    initialiser: str
    run: int
    seed: int
    train_loss: List[float] = field(default_factory=list)
    test_loss: List[float] = field(default_factory=list)
    wall_seconds: float = 0.0
    split_checksum: Optional[str] = None

    @property
    def diverged(self) -> bool:
        return not (np.all(np.isfinite(self.train_loss)) and np.all(np.isfinite(self.test_loss)))

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


@dataclass
class PreparedData:
    name: str
    split: Split
    dataset_checksum: str
    details: Dict = field(default_factory=dict)

    @property
    def input_dim(self) -> int:
        return self.split.train.shape[1]


def _format_validation_error(error: ValidationError) -> str:
    problems = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "config"
        problems.append(f"{location}: {item['msg']}")
    return "; ".join(problems)


def parse_config(document: dict) -> ExperimentConfig:
    """Validate a config mapping, raising ConfigError with every problem listed"""
    try:
        return ExperimentConfig.model_validate(document)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {_format_validation_error(e)}") from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a JSON (JSON5 tolerated) experiment config file"""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        document = json5.loads(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"Config file {path} must contain a JSON object")
    return parse_config(document)


def builtin_config(name: str, settings: Optional[Settings] = None) -> ExperimentConfig:
    """The published hyper-parameters for one of the three benchmark datasets"""
    settings = settings or Settings()
    initialisers = [
        InitialiserSpec(kind=spec.kind, random_stddev=settings.random_normal_stddev)
        for spec in BENCHMARK_INITIALISERS
    ]

    presets = {
        "synthetic": dict(
            dataset=DatasetConfig(kind="synthetic", records=5000, latent_dim=20, features=100),
            batch_size="full",
            epochs=1000,
            convergence_epsilon=0.001,
            convergence_alpha=100,
        ),
        "mnist": dict(
            dataset=DatasetConfig(
                kind="mnist",
                images_path=settings.mnist_images_path,
                test_images_path=settings.mnist_test_images_path,
            ),
            batch_size=256,
            epochs=1000,
            convergence_epsilon=0.005,
            convergence_alpha=250,
        ),
        "swarm": dict(
            dataset=DatasetConfig(
                kind="csv",
                path=settings.swarm_csv_path,
                drop_columns=list(settings.swarm_drop_columns),
            ),
            batch_size="full",
            epochs=1500,
            convergence_epsilon=0.005,
            convergence_alpha=500,
        ),
    }

    key = name.strip().lower()
    if key not in presets:
        raise ConfigError(f"Unknown preset '{name}', expected one of {sorted(presets)}")

    return ExperimentConfig(
        name=key,
        split_fraction=0.8,
        learning_rate=0.1,
        runs=10,
        initialisers=initialisers,
        **presets[key],
    )


class ExperimentRunner:
    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or Settings()

    def load_dataset(self, cfg: DatasetConfig) -> Dataset:
        """Load or synthesise the raw (unscaled) dataset"""
        if cfg.kind == "synthetic":
            return generate_synthetic(Rng(cfg.seed), cfg.records, cfg.latent_dim, cfg.features)

        if cfg.kind == "mnist":
            if not cfg.images_path:
                raise DataFormatError(
                    "MNIST experiment needs dataset.images_path (or STRADDLE_MNIST_IMAGES_PATH)"
                )
            paths = [cfg.images_path] if isinstance(cfg.images_path, str) else list(cfg.images_path)
            if cfg.test_images_path and not cfg.use_original_split:
                paths.append(cfg.test_images_path)
            return load_mnist_idx(paths, limit=cfg.limit)

        if not cfg.path:
            raise DataFormatError("CSV experiment needs dataset.path (or STRADDLE_SWARM_CSV_PATH)")
        return load_csv(cfg.path, cfg.drop_columns)

    def prepare_data(self, cfg: ExperimentConfig) -> PreparedData:
        """Scale on the full data, then split once with the experiment's split seed"""
        dataset_cfg = cfg.dataset

        if dataset_cfg.kind == "mnist" and dataset_cfg.use_original_split:
            if not dataset_cfg.test_images_path:
                raise DataFormatError("use_original_split needs dataset.test_images_path")
            train = self.load_dataset(dataset_cfg)
            test = load_mnist_idx(dataset_cfg.test_images_path, limit=dataset_cfg.limit)
            train, test = scale_pair(train, test)
            data_split = Split(train=train.features, test=test.features, seed=cfg.split_seed, fraction=math.nan)
            checksum = train.checksum()
            name = train.name
        else:
            dataset = minmax_scale(self.load_dataset(dataset_cfg))
            data_split = split(dataset, cfg.split_fraction, cfg.split_seed)
            checksum = dataset.checksum()
            name = dataset.name

        logger.info(
            f"Prepared {name}: {data_split.train.shape[0]} train / {data_split.test.shape[0]} test rows, "
            f"{data_split.train.shape[1]} features"
        )
        return PreparedData(name=name, split=data_split, dataset_checksum=checksum)

    def train_run(self, cfg: ExperimentConfig, spec: InitialiserSpec, run: int, data: PreparedData) -> RunLog:
        """Train one model from scratch and record losses after every epoch"""
        seed = cfg.base_seed + run
        weight_rng = Rng.derive(seed, spec.name)
        shuffle_rng = Rng.derive(seed, "shuffle")
        train_x, test_x = data.split.train, data.split.test

        log = RunLog(initialiser=spec.name, run=run, seed=seed, split_checksum=data.split.checksum())
        started = time.perf_counter()

        model = build_autoencoder(data.input_dim, cfg.hidden, spec, weight_rng)
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            for epoch in range(cfg.epochs):
                train_epoch(model, train_x, cfg.batch_rows, cfg.learning_rate, shuffle_rng)
                train_loss = evaluate(model, train_x)
                test_loss = evaluate(model, test_x)

                if not (math.isfinite(train_loss) and math.isfinite(test_loss)):
                    remaining = cfg.epochs - epoch
                    log.train_loss.extend([DIVERGED_LOSS] * remaining)
                    log.test_loss.extend([DIVERGED_LOSS] * remaining)
                    logger.warning(f"{spec.name} run {run} diverged at epoch {epoch}")
                    break

                log.train_loss.append(train_loss)
                log.test_loss.append(test_loss)

        log.wall_seconds = time.perf_counter() - started
        logger.info(
            f"Finished {spec.name} run {run} (seed {seed}): train {log.train_loss[-1]:.6f}, "
            f"test {log.test_loss[-1]:.6f}, {log.wall_seconds:.1f}s"
        )
        return log

    def resolve_workers(self, cfg: ExperimentConfig, workers: Optional[int] = None) -> int:
        """CLI value, then STRADDLE_WORKERS, then the config file, then 1"""
        if workers is not None:
            if workers < 1:
                raise ValueError(f"workers must be at least 1, got {workers}")
            return workers
        if "workers" in self.settings.model_fields_set:
            return self.settings.workers
        return cfg.workers or self.settings.workers

    def run(
        self,
        cfg: ExperimentConfig,
        data: Optional[PreparedData] = None,
        workers: Optional[int] = None,
    ) -> List[RunLog]:
        """All (initialiser, run) trainings, returned in canonical (initialiser, run) order"""
        data = data or self.prepare_data(cfg)
        workers = self.resolve_workers(cfg, workers)
        tasks: List[Tuple[InitialiserSpec, int]] = [
            (spec, run) for spec in cfg.initialisers for run in range(cfg.runs)
        ]

        logger.info(
            f"Starting experiment '{cfg.name}': {len(cfg.initialisers)} initialisers x {cfg.runs} runs "
            f"x {cfg.epochs} epochs on {workers} worker(s)"
        )

        if workers == 1:
            logs = [self.train_run(cfg, spec, run, data) for spec, run in tasks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(self.train_run, cfg, spec, run, data) for spec, run in tasks]
                logs = [future.result() for future in futures]

        diverged = sum(log.diverged for log in logs)
        logger.info(f"Experiment '{cfg.name}' finished: {len(logs)} runs, {diverged} diverged")
        return logs


def run_experiment(
    cfg: ExperimentConfig,
    settings: Optional[Settings] = None,
    workers: Optional[int] = None,
) -> List[RunLog]:
    return ExperimentRunner(settings).run(cfg, workers=workers)
