"""Engine configuration: one key=value text file shared by the service and CLI.

Format: `section.key = value` per line, `#` comments and blank lines ignored.
Unknown keys or unparsable values abort startup with a ConfigError. The listen
address and persistence root can also be overridden through the environment
(FACTWEAVE_LISTEN, FACTWEAVE_PERSIST_ROOT).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .dataset import EngineThresholds, EnumerationCaps
from .embedding import EmbedderConfig, SlotWeights
from .errors import ConfigError
from .search import InterpolationConfig

ENV_LISTEN = "FACTWEAVE_LISTEN"
ENV_PERSIST_ROOT = "FACTWEAVE_PERSIST_ROOT"


@dataclass(frozen=True)
class ServiceConfig:
    listen: str = "127.0.0.1:8787"
    max_upload_bytes: int = 10 * 1024 * 1024
    persistence_root: str = "./factweave-data"


@dataclass(frozen=True)
class EngineConfig:
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    interpolation: InterpolationConfig = field(default_factory=InterpolationConfig)
    thresholds: EngineThresholds = field(default_factory=EngineThresholds)
    caps: EnumerationCaps = field(default_factory=EnumerationCaps)
    service: ServiceConfig = field(default_factory=ServiceConfig)


def _parse_scalar(raw: str, kind: type, key: str):
    try:
        if kind is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {key}") from None


# key -> (dataclass path, attribute, type)
_KEYS = {
    "embedder.dimension": ("embedder", "dimension", int),
    "embedder.salt": ("embedder", "salt", str),
    "embedder.weight.type": ("weights", "type", float),
    "embedder.weight.subspace": ("weights", "subspace", float),
    "embedder.weight.measure": ("weights", "measure", float),
    "embedder.weight.breakdown": ("weights", "breakdown", float),
    "embedder.weight.focus": ("weights", "focus", float),
    "embedder.weight.meta": ("weights", "meta", float),
    "interpolate.n": ("interpolation", "n", int),
    "interpolate.lambda_rel": ("interpolation", "lambda_rel", float),
    "interpolate.max_iterations": ("interpolation", "max_iterations", int),
    "interpolate.rollout_depth": ("interpolation", "rollout_depth", int),
    "interpolate.exploration_c": ("interpolation", "exploration_c", float),
    "interpolate.branch_cap": ("interpolation", "branch_cap", int),
    "interpolate.rng_seed": ("interpolation", "rng_seed", int),
    "interpolate.time_budget_ms": ("interpolation", "time_budget_ms", int),
    "data.outlier_z": ("thresholds", "outlier_z", float),
    "data.trend_slope_eps": ("thresholds", "trend_slope_eps", float),
    "data.max_filters": ("caps", "max_filters", int),
    "data.max_filter_values": ("caps", "max_filter_values", int),
    "data.enumeration_limit": ("caps", "hard_limit", int),
    "service.listen": ("service", "listen", str),
    "service.max_upload_bytes": ("service", "max_upload_bytes", int),
    "persistence.root": ("service", "persistence_root", str),
}


def parse_engine_config(text: str) -> EngineConfig:
    sections: dict[str, dict] = {
        "embedder": {}, "weights": {}, "interpolation": {}, "thresholds": {},
        "caps": {}, "service": {},
    }
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key = value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        spec = _KEYS.get(key)
        if spec is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        section, attr, kind = spec
        sections[section][attr] = _parse_scalar(raw, kind, key)

    try:
        weights = SlotWeights(**sections["weights"]) if sections["weights"] else SlotWeights()
        embedder = EmbedderConfig(weights=weights, **sections["embedder"])
        interpolation = InterpolationConfig(**sections["interpolation"])
        thresholds = EngineThresholds(**sections["thresholds"])
        caps = EnumerationCaps(**sections["caps"])
        service = ServiceConfig(**sections["service"])
    except Exception as e:
        raise ConfigError(f"invalid configuration: {e}") from e
    return EngineConfig(embedder, interpolation, thresholds, caps, service)


def load_engine_config(path: str | None = None) -> EngineConfig:
    """Config from file (when given) with environment overrides applied."""
    if path is None:
        config = EngineConfig()
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        config = parse_engine_config(text)
    service = config.service
    listen = os.environ.get(ENV_LISTEN)
    root = os.environ.get(ENV_PERSIST_ROOT)
    if listen:
        service = replace(service, listen=listen)
    if root:
        service = replace(service, persistence_root=root)
    return replace(config, service=service)
