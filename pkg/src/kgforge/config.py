"""Pipeline configuration: TOML file plus command-line overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Optional

import tomli

from .agents import API_KEY_ENV, Backend, HttpBackend, RecordBackend, ReplayBackend
from .stages import ConformanceMode, ExpansionConfig, PopulationConfig


class ConfigError(ValueError):
    pass


BACKEND_KINDS = ("http", "replay", "record")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "replay"
    fixtures_dir: Optional[Path] = None
    base_url: str = "https://api.openai.com/v1"
    model: str = ""
    timeout: float = 120.0
    retries: int = 3
    backoff: float = 1.0


@dataclass(frozen=True)
class PipelineConfig:
    corpus_path: Optional[Path] = None
    category: Optional[str] = None
    base_namespace: str = "http://example.org/product-ontology#"
    instance_base: Optional[str] = None
    expansion: ExpansionConfig = field(default_factory=ExpansionConfig)
    max_attempts: int = 3
    conformance_mode: ConformanceMode = ConformanceMode.LENIENT
    backend: BackendConfig = field(default_factory=BackendConfig)
    max_inflight: int = 4
    output_dir: Path = Path("runs")
    prompts_dir: Optional[Path] = None
    allow_drops: bool = False
    paper_mode: bool = False
    temperature: float = 0.0
    max_output_tokens: int = 4096

    @property
    def effective_max_attempts(self) -> int:
        return 1 if self.paper_mode else self.max_attempts

    @property
    def effective_instance_base(self) -> str:
        if self.instance_base:
            return self.instance_base
        return self.base_namespace.rstrip("#/") + "/product/"

    def population(self) -> PopulationConfig:
        return PopulationConfig(
            instance_base=self.effective_instance_base,
            max_attempts=self.effective_max_attempts,
            conformance_mode=self.conformance_mode,
            max_inflight=self.max_inflight,
        )

    def make_backend(self) -> Backend:
        b = self.backend
        if b.kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend {b.kind!r}; expected one of {', '.join(BACKEND_KINDS)}")
        if b.kind in ("replay", "record") and b.fixtures_dir is None:
            raise ConfigError(f"{b.kind} backend needs fixtures_dir")
        if b.kind == "replay":
            if not b.fixtures_dir.is_dir():
                raise ConfigError(f"fixtures directory does not exist: {b.fixtures_dir}")
            return ReplayBackend(b.fixtures_dir)
        if not b.model:
            raise ConfigError("http backend needs a model name")
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise ConfigError(f"environment variable {API_KEY_ENV} is not set")
        live = HttpBackend(
            b.base_url, b.model, key, timeout=b.timeout, retries=b.retries, backoff=b.backoff, max_inflight=self.max_inflight
        )
        if b.kind == "record":
            return RecordBackend(live, b.fixtures_dir)
        return live


_PATH_KEYS = {"corpus_path", "output_dir", "prompts_dir", "fixtures_dir"}


def _coerce(cls, values: dict[str, Any], base_dir: Path, where: str):
    known = {f.name: f for f in fields(cls)}
    out = {}
    for key, value in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key {where}{key!r}")
        if key in _PATH_KEYS and value is not None:
            path = Path(value).expanduser()
            value = path if path.is_absolute() else base_dir / path
        out[key] = value
    return out


def build_config(
    file_values: Optional[dict] = None, overrides: Optional[dict] = None, base_dir: Path = Path(".")
) -> PipelineConfig:
    """Merge file values (paths relative to ``base_dir``) with flag overrides (paths relative to cwd)."""
    file_values = dict(file_values or {})
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    expansion_values = _coerce(ExpansionConfig, file_values.pop("expansion", {}), base_dir, "expansion.")
    backend_values = _coerce(BackendConfig, file_values.pop("backend", {}), base_dir, "backend.")
    top_values = _coerce(PipelineConfig, file_values, base_dir, "")

    cwd = Path(".")
    for key in [f.name for f in fields(ExpansionConfig)]:
        if key in overrides:
            expansion_values[key] = overrides.pop(key)
    for key in [f.name for f in fields(BackendConfig)]:
        if key in overrides:
            backend_values.update(_coerce(BackendConfig, {key: overrides.pop(key)}, cwd, "backend."))
    top_values.update(_coerce(PipelineConfig, overrides, cwd, ""))

    try:
        expansion = ExpansionConfig(**expansion_values)
        backend = BackendConfig(**backend_values)
        if "conformance_mode" in top_values:
            top_values["conformance_mode"] = ConformanceMode(top_values["conformance_mode"])
        cfg = PipelineConfig(expansion=expansion, backend=backend, **top_values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    if cfg.max_attempts < 1 or cfg.max_inflight < 1:
        raise ConfigError("max_attempts and max_inflight must be >= 1")
    return cfg


def load_config(path: Optional[Path], overrides: Optional[dict] = None) -> PipelineConfig:
    if path is None:
        return build_config({}, overrides)
    try:
        with open(path, "rb") as fh:
            values = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return build_config(values, overrides, Path(path).parent)

