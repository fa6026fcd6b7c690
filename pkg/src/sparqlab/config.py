"""Run configuration: dataclasses plus INI-file parsing and emission.

The config file has one section per component ([run], [env], [gate],
[learner], [feedback]); every key maps to a dataclass field of the same name.
Unknown sections or keys are errors, so typos fail loudly instead of silently
running a default.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields, replace
from typing import get_type_hints

from .env import EnvConfig
from .gate import GateConfig
from .oracle import FeedbackMode
from .sac import LearnerConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    total_timesteps: int = 50_000
    eval_every: int = 1000
    eval_episodes: int = 100
    oracle_backend: str = "scripted"
    oracle_timeout_ms: int = 10_000
    env: EnvConfig = field(default_factory=EnvConfig)
    gate: GateConfig = field(default_factory=GateConfig)
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    feedback: FeedbackMode = field(default_factory=FeedbackMode)

    def __post_init__(self) -> None:
        if self.total_timesteps <= 0:
            raise ConfigError("total_timesteps must be positive")
        if self.eval_episodes <= 0:
            raise ConfigError("eval_episodes must be positive")
        if self.eval_every <= 0:
            raise ConfigError("eval_every must be positive")
        if self.oracle_backend not in ("scripted", "human"):
            raise ConfigError(f"unknown oracle_backend {self.oracle_backend!r}")
        if self.oracle_timeout_ms <= 0:
            raise ConfigError("oracle_timeout_ms must be positive")


_SECTION_CLASSES = {
    "env": EnvConfig,
    "gate": GateConfig,
    "learner": LearnerConfig,
    "feedback": FeedbackMode,
}
_RUN_SECTION = "run"


def _convert(raw: str, target_type, section: str, key: str):
    raw = raw.strip()
    if target_type is bool:
        low = raw.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"[{section}] {key}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def _section_kwargs(cls, items, section: str) -> dict:
    hints = get_type_hints(cls)
    known = {f.name: hints[f.name] for f in fields(cls)}
    kwargs = {}
    for key, raw in items:
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{section}]")
        kwargs[key] = _convert(raw, known[key], section, key)
    return kwargs


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keys are case-sensitive
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    run_kwargs: dict = {}
    for section in parser.sections():
        if section == _RUN_SECTION:
            scalar_fields = [f for f in fields(RunConfig)
                             if f.name not in _SECTION_CLASSES]
            hints = get_type_hints(RunConfig)
            known = {f.name: hints[f.name] for f in scalar_fields}
            for key, raw in parser.items(section):
                if key not in known:
                    raise ConfigError(f"unknown key {key!r} in section [run]")
                run_kwargs[key] = _convert(raw, known[key], section, key)
        elif section in _SECTION_CLASSES:
            cls = _SECTION_CLASSES[section]
            try:
                run_kwargs[section] = cls(**_section_kwargs(cls, parser.items(section), section))
            except ValueError as exc:
                raise ConfigError(f"[{section}]: {exc}") from exc
        else:
            raise ConfigError(f"unknown section [{section}]")
    try:
        return RunConfig(**run_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config(handle.read())


def emit_config(cfg: RunConfig) -> str:
    """Canonical INI text for a config; stable across emit/parse cycles."""
    out = io.StringIO()
    out.write("[run]\n")
    for f in fields(RunConfig):
        if f.name in _SECTION_CLASSES:
            continue
        out.write(f"{f.name} = {getattr(cfg, f.name)}\n")
    for section, cls in _SECTION_CLASSES.items():
        out.write(f"\n[{section}]\n")
        value = getattr(cfg, section)
        for f in fields(cls):
            out.write(f"{f.name} = {getattr(value, f.name)}\n")
    return out.getvalue()


def save_config(cfg: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(emit_config(cfg))


def config_hash(cfg: RunConfig, ignore_seed_and_kind: bool = True) -> str:
    """Short digest used to key output files.

    By default the seed and gate kind are masked out so every run of one
    comparison shares a single hash prefix.
    """
    base = cfg
    if ignore_seed_and_kind:
        base = replace(cfg, seed=0, gate=replace(cfg.gate, kind="sparq"))
    digest = hashlib.sha256(emit_config(base).encode()).hexdigest()
    return digest[:10]


def with_method_and_seed(cfg: RunConfig, method: str, seed: int) -> RunConfig:
    return replace(cfg, seed=seed, gate=replace(cfg.gate, kind=method))
