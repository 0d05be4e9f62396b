"""Pipeline configuration: one nested JSON document drives every command.

The document round-trips losslessly, and its canonical-form SHA-256 digest
is embedded in derived artifacts for provenance.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError
from .koopman import HankelConfig
from .pqnn import PqnnConfig, TrainConfig
from .records import ANOMALY_KINDS, SyntheticSpec


@dataclass
class PathsConfig:
    data_dir: str = "data"
    work_dir: str = "work"


@dataclass
class DataConfig:
    train_fraction: float = 0.7
    split_seed: int = 17
    min_record_length: int = 256


@dataclass
class SyntheticConfig:
    n_records: int = 2000
    anomaly_fraction: float = 0.4
    t_range: tuple[int, int] = (2000, 8000)
    anomaly_kinds: tuple[str, ...] = ANOMALY_KINDS
    rng_seed: int = 29

    def to_spec(self) -> SyntheticSpec:
        return SyntheticSpec(
            n_records=self.n_records,
            anomaly_fraction=self.anomaly_fraction,
            t_range=tuple(self.t_range),
            anomaly_kinds=tuple(self.anomaly_kinds),
            rng_seed=self.rng_seed,
        )


@dataclass
class ModelConfig:
    m: int = 6
    k: int = 2
    n: int = 3
    share_params: bool = False
    ansatz: str = "full_unitary"
    layers: int = 3
    norm_eps: float = 1e-5
    init_seed: int = 11
    mln_sizes: tuple[int, ...] = (6, 16, 16, 2)
    mln_init_seed: int = 23

    def to_pqnn_config(self) -> PqnnConfig:
        return PqnnConfig(
            m=self.m, k=self.k, n=self.n,
            share_params=self.share_params,
            ansatz=self.ansatz, layers=self.layers,
            norm_eps=self.norm_eps,
        )


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    data: DataConfig = field(default_factory=DataConfig)
    synthetic: SyntheticConfig = field(default_factory=SyntheticConfig)
    hankel: HankelConfig = field(default_factory=HankelConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    verify_seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()

    @property
    def work_dir(self) -> Path:
        return Path(self.paths.work_dir)

    # Artifact locations, all under the work directory.
    def manifest_path(self) -> Path:
        return self.work_dir / "manifest.jsonl"

    def features_path(self) -> Path:
        return self.work_dir / "features.csv"

    def scaler_path(self) -> Path:
        return self.work_dir / "scaler.json"

    def extract_summary_path(self) -> Path:
        return self.work_dir / "extract_summary.json"

    def checkpoint_path(self) -> Path:
        return self.work_dir / "checkpoint.json"

    def mln_checkpoint_path(self) -> Path:
        return self.work_dir / "mln_checkpoint.json"

    def metrics_path(self) -> Path:
        return self.work_dir / "metrics.json"

    def latents_path(self) -> Path:
        return self.work_dir / "latents.csv"

    def verify_report_path(self) -> Path:
        return self.work_dir / "verify_report.json"

    def screen_report_path(self) -> Path:
        return self.work_dir / "screen_report.json"

    def training_figure_path(self) -> Path:
        return self.work_dir / "training_curves.png"

    def latent_figure_path(self) -> Path:
        return self.work_dir / "latent_scatter.png"


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _build(cls, doc: dict, context: str):
    known = {f.name for f in cls.__dataclass_fields__.values()} if hasattr(cls, "__dataclass_fields__") else set()
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown keys in {context}: {sorted(unknown)}")
    try:
        return cls(**doc)
    except TypeError as exc:
        raise ConfigError(f"bad {context} section: {exc}") from exc


def from_dict(doc: dict) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    sections = {
        "paths": PathsConfig,
        "data": DataConfig,
        "synthetic": SyntheticConfig,
        "hankel": HankelConfig,
        "model": ModelConfig,
        "train": TrainConfig,
    }
    unknown = set(doc) - set(sections) - {"verify_seed"}
    if unknown:
        raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
    kwargs = {}
    for name, cls in sections.items():
        section = dict(doc.get(name, {}))
        # JSON has no tuples; normalize list-valued fields.
        for key, value in section.items():
            if isinstance(value, list):
                section[key] = tuple(value)
        kwargs[name] = _build(cls, section, name)
    return PipelineConfig(verify_seed=int(doc.get("verify_seed", 0)), **kwargs)


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return from_dict(doc)


def save_config(cfg: PipelineConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
