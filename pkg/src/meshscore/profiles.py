"""Scoring-profile ingestion.

A profile file is line-oriented text: `[topic NAME]` opens a topic
section, followed by `key = value` lines for that topic's 8 weights and
26 params.  Values are exact rationals written as integers or `num/den`;
decimal notation is rejected so parsing is bit-exact.  `#` starts a
comment.

The shipped `eth-default` profile is a desk-scale parameterization in
the style of a large beacon-chain deployment (five topics, uniform
weights, a binding topic cap).  Its exact numbers are config data, not
code; the test suite pins against the shipped file.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, fields
from fractions import Fraction

from .types import (
    Params,
    ScoringConfig,
    TopicConfig,
    TopicId,
    Weights,
    format_rational,
    parse_rational,
    validate_config,
)


class ConfigError(ValueError):
    """Raised for unparseable or invalid profile files."""


_WEIGHT_KEYS = [f.name for f in fields(Weights)]
_PARAM_KEYS = [f.name for f in fields(Params)]
_INT_PARAMS = {"d", "d_low", "d_high", "d_lazy", "mcache_len"}
_ALL_KEYS = set(_WEIGHT_KEYS) | set(_PARAM_KEYS)


@dataclass(frozen=True, slots=True)
class Profile:
    name: str
    cfg: ScoringConfig


def parse_config_text(text: str, source: str = "<config>") -> ScoringConfig:
    sections: dict[TopicId, dict[str, Fraction]] = {}
    current: dict[str, Fraction] | None = None
    current_topic = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not (line.endswith("]") and line[1:-1].split()[:1] == ["topic"]):
                raise ConfigError(f"{source}:{lineno}: malformed section header {raw!r}")
            parts = line[1:-1].split()
            if len(parts) != 2:
                raise ConfigError(f"{source}:{lineno}: expected '[topic NAME]'")
            current_topic = parts[1]
            if current_topic in sections:
                raise ConfigError(f"{source}:{lineno}: duplicate topic {current_topic}")
            current = {}
            sections[current_topic] = current
            continue
        if current is None:
            raise ConfigError(f"{source}:{lineno}: value outside a [topic ...] section")
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in current:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r} in [{current_topic}]")
        try:
            current[key] = parse_rational(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None

    entries: dict[TopicId, TopicConfig] = {}
    for topic, kv in sections.items():
        missing = sorted(_ALL_KEYS - set(kv))
        if missing:
            raise ConfigError(f"{source}: [{topic}] is missing keys: {', '.join(missing)}")
        wvals = {k: kv[k] for k in _WEIGHT_KEYS}
        pvals: dict[str, object] = {}
        for k in _PARAM_KEYS:
            v = kv[k]
            if k in _INT_PARAMS:
                if v.denominator != 1:
                    raise ConfigError(f"{source}: [{topic}] {k} must be an integer")
                pvals[k] = int(v)
            else:
                pvals[k] = v
        entries[topic] = TopicConfig(Weights(**wvals), Params(**pvals))
    return ScoringConfig(entries)


def format_config(cfg: ScoringConfig) -> str:
    out: list[str] = []
    for topic in cfg.topics():
        out.append(f"[topic {topic}]")
        tcfg = cfg[topic]
        for k in _WEIGHT_KEYS:
            out.append(f"{k} = {format_rational(getattr(tcfg.weights, k))}")
        for k in _PARAM_KEYS:
            out.append(f"{k} = {format_rational(getattr(tcfg.params, k))}")
        out.append("")
    return "\n".join(out)


def load_config(path: str) -> ScoringConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=path)


def load_valid_config(path: str) -> ScoringConfig:
    cfg = load_config(path)
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(f"{path}: invalid config: " + "; ".join(problems))
    return cfg


BUILTIN_PROFILES = ("eth-default",)


def load_profile(name: str) -> Profile:
    """Load a shipped profile by name."""
    if name not in BUILTIN_PROFILES:
        raise ConfigError(f"unknown profile {name!r}; shipped: {', '.join(BUILTIN_PROFILES)}")
    resource = name.replace("-", "_") + ".cfg"
    text = (
        importlib.resources.files("meshscore.data").joinpath(resource).read_text("utf-8")
    )
    cfg = parse_config_text(text, source=f"profile:{name}")
    problems = validate_config(cfg)
    if problems:
        raise ConfigError(f"profile {name} is invalid: " + "; ".join(problems))
    return Profile(name, cfg)


__all__ = [
    "BUILTIN_PROFILES", "ConfigError", "Profile", "format_config",
    "load_config", "load_profile", "load_valid_config", "parse_config_text",
]
