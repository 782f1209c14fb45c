"""Flat run configuration: defaults < config.json < command-line flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from ..config import POLICY_NAMES, TransformerConfig, TuningPolicy
from ..tuning.train import TrainConfig


@dataclass
class RunConfig:
    seed: int = 0
    policy: str = "finetune"
    adapter_size: int = 8
    mixout_p: float = 0.9
    mixout_compensate: bool = True
    lr: Optional[float] = None
    epochs: int = 20
    batch_size: int = 16
    warmup_fraction: float = 0.1
    metric: str = "accuracy"
    eval_every: Optional[int] = None
    max_steps: Optional[int] = None
    mlm_probability: float = 0.15
    # model shape; vocab_size always comes from the data vocabulary
    num_layers: int = 2
    model_dim: int = 32
    num_heads: int = 2
    ffn_dim: int = 64
    max_seq_len: int = 64
    dropout_rate: float = 0.1
    init_std: float = 0.02
    init_checkpoint: Optional[str] = None
    # data
    min_freq: int = 1
    train_size: Optional[int] = None
    stratified: bool = False
    split: Optional[str] = None
    # analyses
    rsa_sample_size: int = 512
    sweep_lrs: list = field(default_factory=lambda: [2e-5, 4e-5, 6e-5, 8e-5, 1e-4])
    sweep_seeds: list = field(default_factory=lambda: [0, 1, 2, 3, 4])
    workers: int = 1
    # synth
    synth_vocab_size: int = 48
    synth_classes: int = 2
    synth_sizes: list = field(default_factory=lambda: [1000, 200, 200])
    synth_label_noise: float = 0.0
    synth_corpus_size: int = 3000

    def __post_init__(self):
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {', '.join(POLICY_NAMES)}")

    @classmethod
    def keys(cls) -> set:
        return {f.name for f in fields(cls)}

    @classmethod
    def resolve(cls, path: Optional[str], overrides: dict) -> "RunConfig":
        values: dict = {}
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise FileNotFoundError(f"config file {p} does not exist")
            values = json.loads(p.read_text())
            if not isinstance(values, dict):
                raise ValueError(f"{p} must hold a JSON object")
            unknown = set(values) - cls.keys()
            if unknown:
                raise ValueError(f"unknown config keys in {p}: {', '.join(sorted(unknown))}")
        unknown = set(overrides) - cls.keys()
        if unknown:
            raise ValueError(f"unknown override keys: {', '.join(sorted(unknown))}")
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    def tuning_policy(self) -> TuningPolicy:
        return TuningPolicy.from_name(self.policy, self.adapter_size, self.mixout_p, self.mixout_compensate)

    def transformer(self, vocab_size: int) -> TransformerConfig:
        return TransformerConfig(
            num_layers=self.num_layers,
            model_dim=self.model_dim,
            num_heads=self.num_heads,
            ffn_dim=self.ffn_dim,
            vocab_size=vocab_size,
            max_seq_len=self.max_seq_len,
            dropout_rate=self.dropout_rate,
            init_std=self.init_std,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            peak_lr=self.lr,
            warmup_fraction=self.warmup_fraction,
            seed=self.seed,
            eval_every=self.eval_every,
            metric=self.metric,
            max_steps=self.max_steps,
            mlm_probability=self.mlm_probability,
        )
