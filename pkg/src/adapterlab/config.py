"""Plain configuration records shared across the package."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class TransformerConfig:
    num_layers: int = 2
    model_dim: int = 32
    num_heads: int = 2
    ffn_dim: int = 64
    vocab_size: int = 64
    max_seq_len: int = 32
    dropout_rate: float = 0.1
    layer_norm_eps: float = 1e-12
    init_std: float = 0.02

    def __post_init__(self):
        for name in ("num_layers", "model_dim", "num_heads", "ffn_dim", "vocab_size", "max_seq_len"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.model_dim % self.num_heads:
            raise ValueError(f"model_dim {self.model_dim} not divisible by num_heads {self.num_heads}")
        if self.init_std <= 0:
            raise ValueError(f"init_std must be positive, got {self.init_std}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TransformerConfig":
        return cls(**d)


@dataclass(frozen=True)
class AdapterConfig:
    hidden_size: int = 64
    insert_after_attention: bool = True
    insert_after_ffn: bool = True

    def validate(self, model_dim: int) -> None:
        if not 0 < self.hidden_size < model_dim:
            raise ValueError(f"adapter hidden size must satisfy 0 < m < d={model_dim}, got m={self.hidden_size}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MixoutConfig:
    p: float = 0.9
    compensate: bool = True

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"mixout probability must lie in [0, 1), got {self.p}")


@dataclass(frozen=True)
class FullFineTune:
    pass


@dataclass(frozen=True)
class AdapterTuning:
    adapter: AdapterConfig = field(default_factory=AdapterConfig)


POLICY_NAMES = ("finetune", "adapter", "finetune-mixout", "adapter-mixout")


@dataclass(frozen=True)
class TuningPolicy:
    base: Union[FullFineTune, AdapterTuning] = field(default_factory=FullFineTune)
    mixout: Optional[MixoutConfig] = None

    @property
    def is_adapter(self) -> bool:
        return isinstance(self.base, AdapterTuning)

    @property
    def name(self) -> str:
        stem = "adapter" if self.is_adapter else "finetune"
        return stem + ("-mixout" if self.mixout is not None else "")

    @property
    def default_lr(self) -> float:
        return 1e-4 if self.is_adapter else 2e-5

    @classmethod
    def from_name(cls, name: str, adapter_size: int = 64, mixout_p: float = 0.9, compensate: bool = True):
        if name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
        base = AdapterTuning(AdapterConfig(adapter_size)) if name.startswith("adapter") else FullFineTune()
        mix = MixoutConfig(mixout_p, compensate) if name.endswith("-mixout") else None
        return cls(base, mix)

    def to_dict(self) -> dict:
        d = {"name": self.name}
        if self.is_adapter:
            d["adapter"] = self.base.adapter.to_dict()
        if self.mixout is not None:
            d["mixout"] = asdict(self.mixout)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TuningPolicy":
        base = AdapterTuning(AdapterConfig(**d["adapter"])) if "adapter" in d else FullFineTune()
        mix = MixoutConfig(**d["mixout"]) if "mixout" in d else None
        return cls(base, mix)
