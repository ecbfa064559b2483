"""Hyper-parameter record shared by all sequence architectures."""

from __future__ import annotations

from dataclasses import dataclass, replace

ARCHITECTURES = ("rnn", "lstm", "bilstm", "gru", "transformer")
FEATURE_SETS = ("nl", "nl+lag")


@dataclass(frozen=True)
class NetConfig:
    arch: str
    hidden: int = 32
    heads: int = 4
    d_k: int = 8
    dropout: float = 0.20
    learning_rate: float = 5e-4
    clip_norm: float = 0.91
    epochs: int = 300
    batch_size: int = 64
    feature_set: str = "nl"
    seed: int = 0

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if self.hidden < 1:
            raise ValueError("hidden size must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if not self.clip_norm > 0:
            raise ValueError("clip norm must be positive")
        if self.heads < 1 or self.d_k < 1:
            raise ValueError("heads and d_k must be >= 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad epochs/batch size")
        if self.feature_set not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {self.feature_set!r}")

    @property
    def input_dim(self) -> int:
        return 2 if self.feature_set == "nl+lag" else 1

    @property
    def attention_dim(self) -> int:
        return self.heads * self.d_k

    def with_seed(self, seed: int) -> "NetConfig":
        return replace(self, seed=seed)
