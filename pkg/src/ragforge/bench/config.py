"""Run configuration: a nested YAML document, overridable from the command line.

Precedence, lowest to highest: built-in defaults, the ``--config`` file, CLI flags.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Optional

import yaml

from ..errors import ConfigError, DataError
from ..optimizer import GAConfig
from ..pipeline.runner import PipelineConfig
from ..providers import HttpSettings, Providers, http_providers, mock_providers


@dataclass
class CorpusConfig:
    paths: list[str] = field(default_factory=list)
    chunk_limit: int = 1000
    chunks: str = "chunks.jsonl"
    qa: Optional[str] = None


@dataclass
class IndexConfig:
    path: str = "index.rgix"
    with_context: bool = True


@dataclass
class ProviderConfig:
    mode: str = "mock"
    seed: int = 0
    dim: int = 64
    token_ceiling: Optional[int] = None
    chat_url: Optional[str] = None
    embed_url: Optional[str] = None
    chat_model: Optional[str] = None
    embed_model: Optional[str] = None
    timeout: Optional[float] = None
    retries: Optional[int] = None

    def build(self) -> Providers:
        if self.mode == "mock":
            return mock_providers(self.seed, self.dim, self.token_ceiling)
        settings = HttpSettings.from_env(
            chat_url=self.chat_url,
            embed_url=self.embed_url,
            chat_model=self.chat_model,
            embed_model=self.embed_model,
            timeout=self.timeout,
            retries=self.retries,
        )
        return http_providers(settings, self.token_ceiling)


@dataclass
class ReportConfig:
    path: Optional[str] = None
    top: int = 10


@dataclass
class RunConfig:
    seed: int = 0
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    index: IndexConfig = field(default_factory=IndexConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    ga: GAConfig = field(default_factory=GAConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def validate(self) -> "RunConfig":
        if self.provider.mode not in ("mock", "http"):
            raise ConfigError(f"provider.mode must be 'mock' or 'http', got {self.provider.mode!r}")
        if self.corpus.chunk_limit < 1 or self.provider.dim < 1 or self.report.top < 1:
            raise ConfigError("corpus.chunk_limit, provider.dim and report.top must be positive")
        if self.provider.token_ceiling is not None and self.provider.token_ceiling < 1:
            raise ConfigError("provider.token_ceiling must be positive when set")
        try:
            self.pipeline.validate()
            self.ga.validate()
        except Exception as exc:
            raise ConfigError(str(exc)) from exc
        return self


def require_file(path: Optional[str], what: str) -> Path:
    if not path:
        raise ConfigError(f"no {what} path configured")
    p = Path(path)
    if not p.exists():
        raise DataError(f"{what} not found: {p}")
    return p


def _apply(target: Any, data: dict, where: str) -> None:
    known = {f.name: f for f in fields(target)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown config key {where}{key}; expected one of {', '.join(known)}")
        current = getattr(target, key)
        if is_dataclass(current):
            if not isinstance(value, dict):
                raise ConfigError(f"config section {where}{key} must be a mapping")
            _apply(current, value, f"{where}{key}.")
        else:
            if key == "paths" and isinstance(value, str):
                value = [value]
            setattr(target, key, value)


def config_from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    if data:
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        _apply(cfg, data, "")
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {p}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML: {str(exc).splitlines()[0]}") from None
    return config_from_dict(data or {})


def set_path(cfg: RunConfig, dotted: str, value: Any) -> None:
    """Apply one CLI override such as ``ga.population_size``; ``None`` means not given."""
    if value is None:
        return
    *parents, leaf = dotted.split(".")
    target: Any = cfg
    for name in parents:
        target = getattr(target, name)
    setattr(target, leaf, value)
