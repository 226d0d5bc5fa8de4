"""Run configuration and its flat ``key = value`` file format.

Lines are ``key = value``; ``#`` starts a comment.  Every field of
:class:`RunConfig` is addressable by its name.  Booleans accept
true/false/yes/no/1/0, lists are comma separated, and an empty value sets an
optional field to None.  Environment variables are never consulted.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from typing import Any

from .errors import ConfigError

METRIC_NAMES = ("micro_f1", "macro_f1", "weighted_f1", "micro_f1_excl_neutral", "f1c")


@dataclass
class RunConfig:
    # paths
    train_path: str | None = None
    dev_path: str | None = None
    test_path: str | None = None
    schema_path: str | None = None
    checkpoint_dir: str = "checkpoints"
    # model dims
    dim: int = 32
    ff_dim: int = 64
    layers: int = 2
    heads: int = 4
    graph_layers: int = 1
    gtn_steps: int = 2
    k_max: int = 2
    max_len: int = 128
    max_speakers: int = 16
    # optimisation
    optimizer: str = "sgd"
    lr: float = 0.1
    # step-size multiplier for the channel-mixing logits, whose gradients are
    # damped by the softmax Jacobian
    gtn_lr_scale: float = 10.0
    epochs: int = 500
    batch_size: int = 16
    seed: int = 0
    dropout: float = 0.0
    eval_every: int = 1
    # ablations
    no_turn_mask: bool = False
    no_special_tokens: bool = False
    intra_turn_only: bool = False
    # evaluation
    metrics: list[str] = field(default_factory=lambda: ["micro_f1"])
    neutral_class: str | None = None
    length_edges: list[int] = field(default_factory=lambda: [0, 100, 200, 300, 400, 500])

    def validate(self) -> "RunConfig":
        for name in ("dim", "ff_dim", "heads", "gtn_steps", "max_len", "max_speakers", "batch_size", "eval_every"):
            if getattr(self, name) <= 0:
                raise ConfigError("BAD_DIMENSION", f"{name} must be positive")
        for name in ("layers", "graph_layers", "epochs"):
            if getattr(self, name) < 0:
                raise ConfigError("BAD_DIMENSION", f"{name} must be non-negative")
        if self.graph_layers == 0 and not self.intra_turn_only:
            raise ConfigError("BAD_DIMENSION", "graph_layers must be positive unless intra_turn_only")
        if self.dim % self.heads:
            raise ConfigError("BAD_HEADS", f"heads ({self.heads}) must divide dim ({self.dim})")
        if self.k_max not in (1, 2):
            raise ConfigError("BAD_K_MAX", "k_max must be 1 or 2")
        if self.no_special_tokens and not self.no_turn_mask:
            raise ConfigError("INCONSISTENT_FLAGS", "no_special_tokens requires no_turn_mask")
        if self.optimizer != "sgd":
            raise ConfigError("UNSUPPORTED_OPTIMIZER", f"optimizer {self.optimizer!r} is not implemented")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("BAD_DROPOUT", "dropout must be in [0, 1)")
        if self.lr <= 0 or self.gtn_lr_scale <= 0:
            raise ConfigError("BAD_LR", "lr and gtn_lr_scale must be positive")
        unknown = set(self.metrics) - set(METRIC_NAMES)
        if unknown:
            raise ConfigError("UNKNOWN_METRIC", f"unknown metrics {sorted(unknown)}")
        if sorted(self.length_edges) != self.length_edges or not self.length_edges:
            raise ConfigError("BAD_BUCKETS", "length_edges must be non-empty and ascending")
        return self

    def replace(self, **changes: Any) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {_format(value)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("MALFORMED_CONFIG", f"line {lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        return cls().update(values)

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_text(fh.read())
        except OSError as exc:
            raise ConfigError("CONFIG_UNREADABLE", str(exc)) from None

    def update(self, values: dict[str, str]) -> "RunConfig":
        """Copy with string-valued overrides applied and validated."""
        known = {f.name: f for f in fields(self)}
        changes = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError("UNKNOWN_KEY", f"unknown config key {key!r}")
            changes[key] = _coerce(key, known[key].type, value)
        return self.replace(**changes).validate()


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def _coerce(key: str, annotation: str, value: str) -> Any:
    optional = "None" in annotation
    if value == "" and optional:
        return None
    try:
        if annotation.startswith("bool"):
            low = value.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(value)
        if annotation.startswith("int"):
            return int(value)
        if annotation.startswith("float"):
            return float(value)
        if annotation == "list[int]":
            return [int(v) for v in value.split(",") if v.strip()]
        if annotation == "list[str]":
            return [v.strip() for v in value.split(",") if v.strip()]
        return value
    except ValueError:
        raise ConfigError("BAD_VALUE", f"{key}: cannot parse {value!r} as {annotation}") from None
