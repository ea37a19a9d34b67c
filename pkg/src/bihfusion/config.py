"""Run configuration and its ``key = value`` file format."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, fields
from pathlib import Path

from .fusion import MODES, FusionConfig, format_schedule, parse_schedule
from .gnn import GnnConfig
from .model import ModelConfig
from .plm import PlmConfig
from .protein.dataset import TASKS
from .protein.graph import LEVELS

log = logging.getLogger(__name__)

STANDARD_CUTOFFS = (4.0, 6.0, 8.0, 10.0)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    task: str = "mqa"
    mode: str = "local_gated"
    level: str = "base"
    cutoff: float = 10.0
    lr: float = 3e-3
    batch_size: int = 4
    epochs: int = 50
    dropout: float = 0.0
    gnn_layers: int = 3
    plm_layers: int = 2
    hidden_dim: int = 32
    d_model: int = 32
    plm_heads: int = 4
    ffn_dim: int = 64
    fusion_heads: int = 4
    rbf_count: int = 16
    seqdist_dim: int = 8
    max_len: int = 1024
    num_classes: int = 8
    gaussian_noise: bool = False
    euler_noise: bool = False
    noise_sigma: float = 0.02
    schedule: str = "auto"
    freeze_plm: bool = False
    ligand_elements: int = 10
    ligand_dim: int = 16
    train_path: str = ""
    val_path: str = ""
    test_path: str = ""
    embeddings: str = ""
    checkpoint: str = "model.bhfz"

    def validate(self) -> "RunConfig":
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.level not in LEVELS:
            raise ConfigError(f"level must be one of {LEVELS}, got {self.level!r}")
        if not 0.0 < self.lr < 1.0:
            raise ConfigError(f"learning rate must lie in (0, 1), got {self.lr}")
        if self.cutoff <= 0:
            raise ConfigError("cutoff must be positive")
        if self.cutoff not in STANDARD_CUTOFFS:
            log.warning("cutoff %.3g is outside the usual set %s", self.cutoff, STANDARD_CUTOFFS)
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        try:
            parse_schedule(self.schedule)
        except ValueError:
            raise ConfigError(f"bad schedule {self.schedule!r}; use 'auto' or 'g:p,g:p'") from None
        return self

    def model_config(self, precomputed_dim: int | None = None) -> ModelConfig:
        try:
            return ModelConfig(
                task=self.task,
                num_classes=self.num_classes,
                gnn=GnnConfig(hidden_dim=self.hidden_dim, num_layers=self.gnn_layers,
                              rbf_count=self.rbf_count, cutoff=self.cutoff, level=self.level,
                              gaussian_noise=self.gaussian_noise, euler_noise=self.euler_noise,
                              noise_sigma=self.noise_sigma, seqdist_dim=self.seqdist_dim,
                              dropout_p=self.dropout),
                plm=PlmConfig(d_model=self.d_model, num_layers=self.plm_layers, num_heads=self.plm_heads,
                              ffn_dim=self.ffn_dim, max_len=self.max_len, dropout_p=self.dropout),
                fusion=FusionConfig(mode=self.mode, shared_dim=self.hidden_dim, num_heads=self.fusion_heads,
                                    schedule=parse_schedule(self.schedule), freeze_plm=self.freeze_plm),
                ligand_elements=self.ligand_elements,
                ligand_dim=self.ligand_dim,
                precomputed_dim=precomputed_dim,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from None

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def parse_config(text: str, base: RunConfig | None = None, source: str = "<config>") -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        values[key] = _convert(key, val)
    cfg = dataclasses.replace(base or RunConfig(), **values)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config(path.read_text(encoding="utf-8"), source=str(path))


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


__all__ = ["RunConfig", "ConfigError", "parse_config", "load_config", "format_config",
           "FIELD_TYPES", "format_schedule"]
