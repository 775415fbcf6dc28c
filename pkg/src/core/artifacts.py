"""
Run configuration, datasets, checkpoints and CSV outputs

Every file is plain text:

* run configs hold flat ``section.key = value`` lines (``#`` starts a comment);
* datasets start with a ``#bits=n`` header followed by one bitstring per line;
* checkpoints carry ``key = value`` header lines, a ``params = P`` line and
  then the P mesh parameters, one per line with 17 significant digits;
* trace and metrics files are CSV with fixed column order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Literal, Optional, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from core.combinatorics import str_to_bits
from core.errors import ConfigError, DataError
from core.interferometer import InterferometerMesh
from core.permanent import EstimatorConfig
from core.readout import InterpReadout, LiftMode, RankReadout, ReadoutMap, ReadoutTower, build_tower
from core.training import EmpiricalDistribution, TraceRow, TrainConfig

CHECKPOINT_VERSION = 1
TRACE_COLUMNS = ["step", "loss_estimate", "stderr", "grad_norm", "wall_ms"]
METRIC_COLUMNS = ["metric", "value", "stderr"]

PathLike = Union[str, Path]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Section):
    """
    Which readout-mapped model to build

    With ``m`` and ``k`` set the readout is a single interp or rank map on
    those dimensions; otherwise a tower is built and level ``level`` used.
    """

    n: int = Field(ge=1)
    construction: Literal["interp", "bleed", "rank"] = "interp"
    m: Optional[int] = Field(default=None, ge=1)
    k: Optional[int] = Field(default=None, ge=1)
    level: int = Field(default=1, ge=1)
    photons: int = Field(default=2, ge=1)
    levels: int = Field(default=4, ge=1)
    base_m: Optional[int] = Field(default=None, ge=1)
    base_k: Optional[int] = Field(default=None, ge=1)
    strict: bool = False
    init: str = Field(default="haar", pattern="^(haar|identity)$")

    @model_validator(mode="after")
    def _check_dims(self):
        if (self.m is None) != (self.k is None):
            raise ValueError("model.m and model.k must be given together")
        if self.construction == "rank" and self.m is None:
            raise ValueError("rank readout needs model.m and model.k")
        if (self.base_m is None) != (self.base_k is None):
            raise ValueError("model.base_m and model.base_k must be given together")
        return self


class KernelSection(_Section):
    kind: str = Field(default="gaussian_hamming", pattern="^gaussian_hamming$")
    sigma: Optional[float] = Field(default=None, gt=0)  # median heuristic when unset


class TrainingSection(_Section):
    optimizer: str = Field(default="adam", pattern="^(adam|sgd)$")
    learning_rate: float = Field(default=0.05, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    momentum: float = Field(default=0.0, ge=0, lt=1)
    steps: int = Field(default=300, ge=0)
    batch_alphas: int = Field(default=32, ge=1)
    n_samples: Optional[int] = Field(default=None, ge=1)
    epsilon: Optional[float] = Field(default=None, gt=0)
    delta: Optional[float] = Field(default=None, gt=0, lt=1)
    exhaustive: bool = False
    exhaustive_alphas: bool = False
    lift_mode: LiftMode = LiftMode.DETERMINISTIC
    log_every: int = Field(default=25, ge=1)


class IoSection(_Section):
    dataset: Optional[str] = None
    out_dir: str = "."
    checkpoint: str = "checkpoint.txt"
    trace: str = "trace.csv"
    timing: bool = False


class RunSection(_Section):
    seed: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)


class RunConfig(_Section):
    """A parsed run configuration; ``io`` is not part of the config hash"""

    model: ModelSection
    kernel: KernelSection = Field(default_factory=KernelSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    io: IoSection = Field(default_factory=IoSection)
    run: RunSection = Field(default_factory=RunSection)

    def train_config(self) -> TrainConfig:
        t = self.training
        estimator = EstimatorConfig(
            n_samples=t.n_samples,
            epsilon=t.epsilon,
            delta=t.delta,
            seed=self.run.seed,
            exhaustive=t.exhaustive,
        )
        return TrainConfig(
            optimizer=t.optimizer,
            learning_rate=t.learning_rate,
            beta1=t.beta1,
            beta2=t.beta2,
            momentum=t.momentum,
            steps=t.steps,
            batch_alphas=t.batch_alphas,
            estimator=estimator,
            exhaustive_alphas=t.exhaustive_alphas,
            lift_mode=t.lift_mode,
            seed=self.run.seed,
            workers=self.run.workers,
            log_every=t.log_every,
        )

    def flat_items(self, sections: Iterable[str] = ("model", "kernel", "training", "run")) -> List[Tuple[str, str]]:
        """``(section.key, value)`` pairs in declaration order, unset options omitted"""
        items = []
        for section in sections:
            values = getattr(self, section).model_dump(mode="json", exclude_none=True)
            for key, value in values.items():
                items.append((f"{section}.{key}", _format_value(value)))
        return items

    def config_hash(self) -> str:
        canonical = json.dumps(dict(self.flat_items()), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _error_key(error: ValidationError) -> str:
    first = error.errors()[0]
    return ".".join(str(part) for part in first["loc"])


def parse_config_lines(lines: Iterable[str], source: str = "<config>") -> Dict[str, Dict[str, str]]:
    """Group ``section.key = value`` lines into nested dicts"""
    sections: Dict[str, Dict[str, str]] = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.count(".") != 1 or not all(key.split(".")):
            raise ConfigError(f"{source}:{lineno}: key {key!r} must have the form section.key", key=key)
        section, name = key.split(".")
        if name in sections.get(section, {}):
            raise ConfigError(f"{source}:{lineno}: duplicate key {key}", key=key)
        sections.setdefault(section, {})[name] = value
    return sections


def build_run_config(sections: Dict[str, Dict[str, str]]) -> RunConfig:
    for section in sections:
        if section not in RunConfig.model_fields:
            raise ConfigError(f"unknown config section {section!r}", key=section)
    try:
        return RunConfig.model_validate(sections)
    except ValidationError as e:
        key = _error_key(e)
        raise ConfigError(f"invalid setting {key}: {e.errors()[0]['msg']}", key=key) from e


def load_run_config(path: PathLike, require_dataset: bool = True) -> RunConfig:
    """
    Read and validate a run config

    A relative ``io.dataset`` is resolved against the config's directory and
    must exist when ``require_dataset`` is set.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found", key="--config")
    config = build_run_config(parse_config_lines(path.read_text().splitlines(), str(path)))
    if config.io.dataset is not None:
        dataset = Path(config.io.dataset)
        if not dataset.is_absolute():
            dataset = path.parent / dataset
        config.io.dataset = str(dataset)
    if require_dataset:
        if config.io.dataset is None:
            raise ConfigError("io.dataset is required", key="io.dataset")
        if not Path(config.io.dataset).is_file():
            raise DataError(f"io.dataset: file {config.io.dataset} not found")
    logger.debug(f"Loaded run config {path} (hash {config.config_hash()[:12]})")
    return config


def build_model_tower(model: ModelSection) -> Optional[ReadoutTower]:
    """The tower the configured model sits in; None for single-map models"""
    if model.m is not None:
        return None
    base = (model.base_m, model.base_k) if model.base_m is not None else None
    return build_tower(
        model.n,
        model.construction,
        base=base,
        photons=model.photons,
        levels=model.levels,
        strict=model.strict,
    )


def build_model_readout(model: ModelSection) -> ReadoutMap:
    """The readout of the configured model"""
    if model.m is not None:
        if model.construction == "rank":
            return RankReadout(model.m, model.k, model.n)
        if model.construction == "interp":
            return InterpReadout(model.m, model.k, model.n, strict=model.strict)
        raise ConfigError("bleed models are built from a tower; drop model.m/model.k", key="model.construction")
    tower = build_model_tower(model)
    if model.level > len(tower):
        raise ConfigError(f"tower has {len(tower)} levels, model.level is {model.level}", key="model.level")
    return tower.level(model.level)


def read_dataset(path: PathLike) -> EmpiricalDistribution:
    """Bitstring samples under a mandatory ``#bits=n`` header"""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e

    n_bits = None
    samples = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if n_bits is None:
            if not line.startswith("#bits="):
                raise DataError(f"{path}:{lineno}: dataset must start with a '#bits=n' header")
            try:
                n_bits = int(line[len("#bits="):])
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad header {line!r}") from None
            if n_bits < 1:
                raise DataError(f"{path}:{lineno}: bit count must be positive")
            continue
        if line.startswith("#"):
            continue
        if len(line) != n_bits or set(line) - {"0", "1"}:
            raise DataError(f"{path}:{lineno}: {line!r} is not a {n_bits}-bit string")
        samples.append(str_to_bits(line))

    if n_bits is None:
        raise DataError(f"{path}: missing '#bits=n' header")
    if not samples:
        raise DataError(f"{path}: dataset has no samples")
    logger.info(f"Read {len(samples)} samples of {n_bits} bits from {path}")
    return EmpiricalDistribution.from_samples(samples)


def write_dataset(path: PathLike, samples: Iterable[str], n_bits: int):
    with open(path, "w", newline="\n") as f:
        f.write(f"#bits={n_bits}\n")
        for line in samples:
            f.write(f"{line}\n")


@dataclass(frozen=True)
class Checkpoint:
    config: RunConfig
    mesh: InterferometerMesh
    sigma: float
    config_hash: str
    final_loss: float
    final_stderr: float
    tower: Tuple[str, ...] = ()
    version: int = CHECKPOINT_VERSION


def write_checkpoint(path: PathLike, checkpoint: Checkpoint):
    lines = [
        "# boson sampling Born machine checkpoint",
        f"version = {checkpoint.version}",
    ]
    lines += [f"{key} = {value}" for key, value in checkpoint.config.flat_items()]
    lines += [f"tower = {row}" for row in checkpoint.tower]
    lines += [
        f"kernel_sigma = {_format_value(float(checkpoint.sigma))}",
        f"config_hash = {checkpoint.config_hash}",
        f"final_loss = {_format_value(float(checkpoint.final_loss))}",
        f"final_stderr = {_format_value(float(checkpoint.final_stderr))}",
        f"params = {checkpoint.mesh.params.size}",
    ]
    lines += [_format_value(float(x)) for x in checkpoint.mesh.params]
    Path(path).write_text("\n".join(lines) + "\n")
    logger.info(f"Wrote checkpoint {path} ({checkpoint.mesh.params.size} parameters)")


def load_checkpoint(path: PathLike) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint {path} not found")
    lines = [line.strip() for line in path.read_text().splitlines()]

    header: Dict[str, str] = {}
    config_lines: List[str] = []
    tower: List[str] = []
    params_at = None
    for i, line in enumerate(lines):
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{i + 1}: malformed header line {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "params":
            params_at = i
            header[key] = value
            break
        if key == "tower":
            tower.append(value)
        elif "." in key:
            config_lines.append(line)
        else:
            header[key] = value
    if params_at is None:
        raise DataError(f"{path}: no 'params = N' line")

    try:
        version = int(header.get("version", "0"))
        count = int(header["params"])
        values = [float(x) for x in lines[params_at + 1:] if x]
        sigma = float(header["kernel_sigma"])
        final_loss = float(header["final_loss"])
        final_stderr = float(header["final_stderr"])
        config_hash = header["config_hash"]
    except (KeyError, ValueError) as e:
        raise DataError(f"{path}: bad checkpoint header ({e})") from e
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    if len(values) != count:
        raise DataError(f"{path}: expected {count} parameters, found {len(values)}")

    try:
        config = build_run_config(parse_config_lines(config_lines, str(path)))
    except ConfigError as e:
        raise DataError(f"{path}: {e}") from e
    if config.config_hash() != config_hash:
        logger.warning(f"{path}: config hash does not match the stored settings")
    m = int(round(np.sqrt(count)))
    mesh = InterferometerMesh(m, np.array(values))
    return Checkpoint(
        config=config,
        mesh=mesh,
        sigma=sigma,
        config_hash=config_hash,
        final_loss=final_loss,
        final_stderr=final_stderr,
        tower=tuple(tower),
        version=version,
    )


def trace_csv(trace: Iterable[TraceRow], timing: bool = False) -> str:
    """Loss trace; ``wall_ms`` is 0 unless timing is requested"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for row in trace:
        wall_ms = _format_value(float(row.wall_ms)) if timing else "0"
        writer.writerow([
            row.step,
            _format_value(float(row.loss)),
            _format_value(float(row.stderr)),
            _format_value(float(row.grad_norm)),
            wall_ms,
        ])
    return buffer.getvalue()


def metrics_csv(rows: Iterable[Tuple[str, object, object]]) -> str:
    """``metric,value,stderr``; floats with 17 significant digits, other values verbatim"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    for metric, value, stderr in rows:
        writer.writerow([
            metric,
            _format_value(value) if isinstance(value, float) else value,
            _format_value(stderr) if isinstance(stderr, float) else ("" if stderr is None else stderr),
        ])
    return buffer.getvalue()
