"""Service configuration: defaults, JSON config file, environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Any, Mapping


class ConfigError(Exception):
    """Startup configuration is invalid; the server must not start."""


def packaged_data(name: str) -> Path:
    """Path of a data file shipped inside the package."""
    return Path(str(files("equipcopilot").joinpath(f"data/{name}")))


@dataclass
class LLMSettings:
    backend: str = "scripted"  # scripted | live | replay
    api_base: str | None = None
    api_key: str = ""
    model: str = "gpt-4o"
    temperature: float = 0.0
    max_parse_retries: int = 2
    transport_retries: int = 3
    prompt_budget: int = 16000
    script_path: str | None = None


@dataclass
class RetrievalSettings:
    chunk_size: int = 750
    overlap: int = 150
    embedder: str = "deterministic"  # deterministic | http
    dimension: int = 384
    normalize: bool = True
    embedder_url: str | None = None


@dataclass
class OrchestratorSettings:
    max_iterations: int = 3
    top_k: int = 3
    max_candidates: int = 5


@dataclass
class ServiceConfig:
    llm: LLMSettings = field(default_factory=LLMSettings)
    retrieval: RetrievalSettings = field(default_factory=RetrievalSettings)
    orchestrator: OrchestratorSettings = field(default_factory=OrchestratorSettings)
    catalog_path: str = ""
    corpus_dir: str = ""
    bind: str = "127.0.0.1:8080"
    admin_token: str = ""
    ui_origin: str | None = None

    def __post_init__(self) -> None:
        if not self.catalog_path:
            self.catalog_path = str(packaged_data("catalog.json"))
        if not self.corpus_dir:
            self.corpus_dir = str(packaged_data("corpus"))

    def validate(self, *, require_llm_backend: bool = True) -> None:
        """Raise a named ConfigError for anything that would break at runtime.

        ``require_llm_backend`` is off when the caller injects a prebuilt
        backend object instead of constructing one from these settings.
        """
        if self.llm.backend not in ("scripted", "live", "replay"):
            raise ConfigError(f"llm.backend must be scripted, live, or replay, got {self.llm.backend!r}")
        if require_llm_backend and self.llm.backend == "live" and not self.llm.api_base:
            raise ConfigError("llm.backend is live but llm.api_base (LLM_API_BASE) is unset")
        if require_llm_backend and self.llm.backend in ("scripted", "replay") and not self.llm.script_path:
            raise ConfigError(f"llm.backend is {self.llm.backend} but llm.script_path is unset")
        if self.llm.max_parse_retries < 0:
            raise ConfigError("llm.max_parse_retries must be non-negative")
        if self.llm.transport_retries < 1:
            raise ConfigError("llm.transport_retries must be at least 1")
        if self.retrieval.embedder not in ("deterministic", "http"):
            raise ConfigError(f"retrieval.embedder must be deterministic or http, got {self.retrieval.embedder!r}")
        if self.retrieval.embedder == "http" and not self.retrieval.embedder_url:
            raise ConfigError("retrieval.embedder is http but retrieval.embedder_url is unset")
        if self.retrieval.overlap >= self.retrieval.chunk_size:
            raise ConfigError("retrieval.overlap must be smaller than retrieval.chunk_size")
        if self.orchestrator.max_iterations < 1:
            raise ConfigError("orchestrator.max_iterations must be at least 1")
        if self.orchestrator.top_k < 1:
            raise ConfigError("orchestrator.top_k must be at least 1")
        if not Path(self.catalog_path).exists():
            raise ConfigError(f"catalog_path does not exist: {self.catalog_path}")
        if ":" not in self.bind:
            raise ConfigError(f"bind must look like host:port, got {self.bind!r}")


def _apply_section(target: Any, raw: Mapping[str, Any], section: str) -> None:
    for key, value in raw.items():
        if not hasattr(target, key):
            raise ConfigError(f"unknown config key {section}.{key}")
        setattr(target, key, value)


def load_config(
    path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
) -> ServiceConfig:
    """Build a validated ServiceConfig from an optional JSON file plus the environment.

    Environment variables override file values: LLM_API_BASE, LLM_API_KEY,
    LLM_MODEL, LLM_TEMPERATURE, LLM_MAX_PARSE_RETRIES, SERVICE_BIND,
    ADMIN_TOKEN, UI_ORIGIN.
    """
    env = env if env is not None else os.environ
    config = ServiceConfig()
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load config file {path}: {exc}") from exc
        for section, payload in raw.items():
            if section in ("llm", "retrieval", "orchestrator"):
                _apply_section(getattr(config, section), payload, section)
            elif hasattr(config, section):
                setattr(config, section, payload)
            else:
                raise ConfigError(f"unknown config section {section!r}")
    if env.get("LLM_API_BASE"):
        config.llm.api_base = env["LLM_API_BASE"]
    if env.get("LLM_API_KEY"):
        config.llm.api_key = env["LLM_API_KEY"]
    if env.get("LLM_MODEL"):
        config.llm.model = env["LLM_MODEL"]
    if env.get("LLM_TEMPERATURE"):
        try:
            config.llm.temperature = float(env["LLM_TEMPERATURE"])
        except ValueError as exc:
            raise ConfigError(f"LLM_TEMPERATURE is not a number: {env['LLM_TEMPERATURE']!r}") from exc
    if env.get("LLM_MAX_PARSE_RETRIES"):
        try:
            config.llm.max_parse_retries = int(env["LLM_MAX_PARSE_RETRIES"])
        except ValueError as exc:
            raise ConfigError(
                f"LLM_MAX_PARSE_RETRIES is not an integer: {env['LLM_MAX_PARSE_RETRIES']!r}"
            ) from exc
    if env.get("SERVICE_BIND"):
        config.bind = env["SERVICE_BIND"]
    if env.get("ADMIN_TOKEN"):
        config.admin_token = env["ADMIN_TOKEN"]
    if env.get("UI_ORIGIN"):
        config.ui_origin = env["UI_ORIGIN"]
    config.validate()
    return config
