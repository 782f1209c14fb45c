"""Post-norm transformer encoder with optional bottleneck adapters.

Parameter names are hierarchical and stable; they double as checkpoint keys
and as the grouping used by deviation reports::

    embeddings.token.weight, embeddings.position.weight
    layer.{i}.attention.{query,key,value,output}.{weight,bias}
    layer.{i}.adapter_attn.{down,up}.{weight,bias}     (optional)
    layer.{i}.ln_attn.{gain,bias}
    layer.{i}.ffn.{intermediate,output}.{weight,bias}
    layer.{i}.adapter_ffn.{down,up}.{weight,bias}      (optional)
    layer.{i}.ln_ffn.{gain,bias}
    classifier.{weight,bias}, mlm_head.{weight,bias}

Linear weights are stored (in, out) and applied as ``x @ W + b``.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np

from ._rng import derive_rng
from .config import AdapterConfig, AdapterTuning, MixoutConfig, TransformerConfig, TuningPolicy
from .data.vocab import PAD_ID
from .mixout import mixout_weight, sample_mask
from .tensor import ops
from .tensor.core import Parameter, Tensor

INIT_STD = 0.02
ADAPTER_INIT_STD = 1e-3
HEADS = ("classifier", "mlm_head")


def parameter_shapes(
    config: TransformerConfig, num_classes: int, adapters: Optional[AdapterConfig] = None
) -> dict[str, tuple]:
    """Ordered name -> shape table; the order is the canonical parameter order."""
    d, f, m = config.model_dim, config.ffn_dim, adapters.hidden_size if adapters else 0
    shapes: dict[str, tuple] = {
        "embeddings.token.weight": (config.vocab_size, d),
        "embeddings.position.weight": (config.max_seq_len, d),
    }

    def lin(prefix, n_in, n_out):
        shapes[f"{prefix}.weight"] = (n_in, n_out)
        shapes[f"{prefix}.bias"] = (n_out,)

    def adapter(prefix):
        lin(f"{prefix}.down", d, m)
        lin(f"{prefix}.up", m, d)

    for i in range(config.num_layers):
        p = f"layer.{i}"
        for proj in ("query", "key", "value", "output"):
            lin(f"{p}.attention.{proj}", d, d)
        if adapters and adapters.insert_after_attention:
            adapter(f"{p}.adapter_attn")
        shapes[f"{p}.ln_attn.gain"] = (d,)
        shapes[f"{p}.ln_attn.bias"] = (d,)
        lin(f"{p}.ffn.intermediate", d, f)
        lin(f"{p}.ffn.output", f, d)
        if adapters and adapters.insert_after_ffn:
            adapter(f"{p}.adapter_ffn")
        shapes[f"{p}.ln_ffn.gain"] = (d,)
        shapes[f"{p}.ln_ffn.bias"] = (d,)
    lin("classifier", d, num_classes)
    lin("mlm_head", d, config.vocab_size)
    return shapes


def is_adapter_param(name: str) -> bool:
    return ".adapter_" in name


def is_norm_param(name: str) -> bool:
    return ".ln_" in name


def _init_value(name: str, shape: tuple, seed: int, std: float = INIT_STD) -> np.ndarray:
    if is_adapter_param(name):
        if ".down.weight" in name:
            return derive_rng(seed, "init:" + name).normal(0.0, ADAPTER_INIT_STD, shape)
        return np.zeros(shape)
    if name.endswith(".gain"):
        return np.ones(shape)
    if name.endswith(".bias"):
        return np.zeros(shape)
    return derive_rng(seed, "init:" + name).normal(0.0, std, shape)


class Linear:
    def __init__(self, weight: Parameter, bias: Parameter):
        self.weight = weight
        self.bias = bias
        self.mixout: Optional[MixoutConfig] = None

    def __call__(self, x, rng: Optional[np.random.Generator] = None) -> Tensor:
        w = self.weight
        if self.mixout is not None and rng is not None:
            mask = sample_mask(rng, w.shape[0], self.mixout.p)
            w = mixout_weight(w, w.initial, self.mixout.p, mask, self.mixout.compensate)
        return ops.linear(x, w, self.bias)


class LayerNorm:
    def __init__(self, gain: Parameter, bias: Parameter, eps: float):
        self.gain = gain
        self.bias = bias
        self.eps = eps

    def __call__(self, x) -> Tensor:
        return ops.layer_norm(x, self.gain, self.bias, self.eps)


class AdapterLayer:
    """Bottleneck ``f2(tanh(f1(h))) + h``; f1 maps d -> m, f2 maps m -> d."""

    def __init__(self, down: Linear, up: Linear):
        self.down = down
        self.up = up

    @property
    def model_dim(self) -> int:
        return self.down.weight.shape[0]


def adapter_forward(h, adapter: AdapterLayer, rng: Optional[np.random.Generator] = None) -> Tensor:
    h = ops.as_tensor(h)
    if h.shape[-1] != adapter.model_dim:
        raise ValueError(f"adapter expects trailing dim {adapter.model_dim}, got input {h.shape}")
    z = ops.tanh(adapter.down(h, rng))
    return ops.add(adapter.up(z, rng), h)


class EncoderLayer:
    def __init__(self, query, key, value, output, adapter_attn, ln_attn, intermediate, ffn_out, adapter_ffn, ln_ffn):
        self.query, self.key, self.value, self.output = query, key, value, output
        self.adapter_attn = adapter_attn
        self.ln_attn = ln_attn
        self.intermediate, self.ffn_out = intermediate, ffn_out
        self.adapter_ffn = adapter_ffn
        self.ln_ffn = ln_ffn

    def linears(self):
        out = [self.query, self.key, self.value, self.output, self.intermediate, self.ffn_out]
        for a in (self.adapter_attn, self.adapter_ffn):
            if a is not None:
                out += [a.down, a.up]
        return out


class EncoderModel:
    """Transformer encoder with classification and masked-LM heads.

    Each layer runs ``attention -> [adapter A] -> add & norm -> ffn ->
    [adapter B] -> add & norm``.  Initialization is keyed per parameter name,
    so the same ``seed`` yields identical base weights with or without
    adapters.
    """

    def __init__(
        self,
        config: TransformerConfig,
        num_classes: int = 2,
        adapters: Optional[AdapterConfig] = None,
        seed: int = 0,
    ):
        if num_classes < 2:
            raise ValueError(f"num_classes must be at least 2, got {num_classes}")
        if adapters is not None:
            adapters.validate(config.model_dim)
        self.config = config
        self.num_classes = num_classes
        self.adapters = adapters
        self.seed = seed
        self.params: dict[str, Parameter] = {
            name: Parameter(name, _init_value(name, shape, seed, config.init_std))
            for name, shape in parameter_shapes(config, num_classes, adapters).items()
        }
        self.training = False
        self.use_dropout = True
        self.reseed(seed)
        self._build()

    def _build(self):
        P = self.params
        eps = self.config.layer_norm_eps

        def lin(prefix):
            return Linear(P[f"{prefix}.weight"], P[f"{prefix}.bias"])

        def adapter(prefix):
            if f"{prefix}.down.weight" not in P:
                return None
            return AdapterLayer(lin(f"{prefix}.down"), lin(f"{prefix}.up"))

        self.layers = []
        for i in range(self.config.num_layers):
            p = f"layer.{i}"
            self.layers.append(
                EncoderLayer(
                    lin(f"{p}.attention.query"),
                    lin(f"{p}.attention.key"),
                    lin(f"{p}.attention.value"),
                    lin(f"{p}.attention.output"),
                    adapter(f"{p}.adapter_attn"),
                    LayerNorm(P[f"{p}.ln_attn.gain"], P[f"{p}.ln_attn.bias"], eps),
                    lin(f"{p}.ffn.intermediate"),
                    lin(f"{p}.ffn.output"),
                    adapter(f"{p}.adapter_ffn"),
                    LayerNorm(P[f"{p}.ln_ffn.gain"], P[f"{p}.ln_ffn.bias"], eps),
                )
            )
        self.classifier = lin("classifier")
        self.mlm_head = lin("mlm_head")

    # -- bookkeeping -------------------------------------------------------

    @property
    def has_adapters(self) -> bool:
        return self.adapters is not None

    def parameters(self) -> list[Parameter]:
        return list(self.params.values())

    @classmethod
    def from_pretrained(
        cls,
        backbone: "EncoderModel",
        num_classes: int = 2,
        adapters: Optional[AdapterConfig] = None,
        seed: int = 0,
    ) -> "EncoderModel":
        """New model starting from ``backbone``'s weights with a fresh classifier.

        Parameters that ``backbone`` has with the same shape are copied
        (adapters included, so adapters trained by MLM pretraining carry
        over); the rest are initialized from ``seed``.  Each copied
        parameter's ``initial`` snapshot is the copied value, so deviation,
        landscape and Mixout anchors refer to the starting weights.
        """
        model = cls(backbone.config, num_classes, adapters, seed)
        for name, p in model.params.items():
            src = backbone.params.get(name)
            if name.startswith("classifier.") or src is None or src.shape != p.shape:
                continue
            model.params[name] = Parameter(name, src.data.copy())
        model._build()
        return model

    def named_parameters(self) -> dict[str, Parameter]:
        return dict(self.params)

    def linears(self) -> list[Linear]:
        out = []
        for layer in self.layers:
            out += layer.linears()
        return out + [self.classifier, self.mlm_head]

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def reseed(self, seed: int) -> None:
        """Reset the dropout and Mixout streams."""
        self._dropout_rng = derive_rng(seed, "dropout")
        self._mixout_rng = derive_rng(seed, "mixout")

    def train(self, mode: bool = True) -> "EncoderModel":
        self.training = mode
        return self

    def eval(self) -> "EncoderModel":
        return self.train(False)

    def copy(self) -> "EncoderModel":
        return copy.deepcopy(self)

    def spec(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "num_classes": self.num_classes,
            "adapters": self.adapters.to_dict() if self.adapters else None,
            "seed": self.seed,
        }

    # -- forward -----------------------------------------------------------

    def _check_ids(self, token_ids) -> np.ndarray:
        ids = np.asarray(token_ids)
        if ids.ndim != 2:
            raise ValueError(f"token ids must be (batch, seq), got shape {ids.shape}")
        if not np.issubdtype(ids.dtype, np.integer):
            raise ValueError(f"token ids must be integers, got {ids.dtype}")
        if ids.shape[1] > self.config.max_seq_len:
            raise ValueError(f"sequence length {ids.shape[1]} exceeds max_seq_len {self.config.max_seq_len}")
        bad = np.argwhere((ids < 0) | (ids >= self.config.vocab_size))
        if bad.size:
            b, s = (int(v) for v in bad[0])
            raise ValueError(
                f"token id {int(ids[b, s])} at (example {b}, position {s}) outside vocabulary of size {self.config.vocab_size}"
            )
        return ids.astype(np.int64)

    def forward(self, token_ids, mode: Optional[str] = None):
        """Return ``(hidden_states, pooled)``.

        ``hidden_states[0]`` is the embedding output and ``hidden_states[i]``
        the output of layer ``i``; ``pooled`` is the final first-token row.
        ``mode`` ('train'/'eval') overrides the model's current mode.
        """
        ids = self._check_ids(token_ids)
        training = self.training if mode is None else mode == "train"
        if mode not in (None, "train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        rate = self.config.dropout_rate if (training and self.use_dropout) else 0.0
        drop_rng = self._dropout_rng
        mix_rng = self._mixout_rng if training else None

        def drop(t):
            return ops.dropout(t, rate, drop_rng) if rate > 0.0 else t

        P = self.params
        seq = ids.shape[1]
        key_mask = ids != PAD_ID
        x = ops.add(
            ops.embedding(P["embeddings.token.weight"], ids),
            ops.embedding(P["embeddings.position.weight"], np.arange(seq)),
        )
        x = drop(x)
        hidden = [x]
        heads = self.config.num_heads
        for layer in self.layers:
            a = ops.attention(layer.query(x, mix_rng), layer.key(x, mix_rng), layer.value(x, mix_rng), heads, key_mask)
            a = drop(layer.output(a, mix_rng))
            if layer.adapter_attn is not None:
                a = adapter_forward(a, layer.adapter_attn, mix_rng)
            x = layer.ln_attn(ops.add(x, a))
            f = ops.gelu(layer.intermediate(x, mix_rng))
            f = drop(layer.ffn_out(f, mix_rng))
            if layer.adapter_ffn is not None:
                f = adapter_forward(f, layer.adapter_ffn, mix_rng)
            x = layer.ln_ffn(ops.add(x, f))
            hidden.append(x)
        pooled = ops.select(x, (slice(None), 0))
        return hidden, pooled

    def classification_logits(self, token_ids, mode: Optional[str] = None) -> Tensor:
        _, pooled = self.forward(token_ids, mode)
        training = self.training if mode is None else mode == "train"
        return self.classifier(pooled, self._mixout_rng if training else None)

    def classification_loss(self, token_ids, labels, mode: Optional[str] = None) -> Tensor:
        return ops.cross_entropy(self.classification_logits(token_ids, mode), labels)

    def mlm_loss(self, token_ids, positions, targets, mode: Optional[str] = None) -> Tensor:
        """Cross-entropy at flat ``positions`` (row-major into batch x seq)."""
        hidden, _ = self.forward(token_ids, mode)
        training = self.training if mode is None else mode == "train"
        rows = ops.take_rows(hidden[-1], positions)
        logits = self.mlm_head(rows, self._mixout_rng if training else None)
        return ops.cross_entropy(logits, targets)


def encoder_forward(model: EncoderModel, token_ids, mode: str = "eval"):
    return model.forward(token_ids, mode)


@dataclass(frozen=True)
class PartitionReport:
    trainable: tuple
    frozen: tuple


def is_trainable(name: str, policy: TuningPolicy, head: str = "classifier") -> bool:
    if not isinstance(policy.base, AdapterTuning):
        return True
    return is_adapter_param(name) or is_norm_param(name) or name.startswith(head + ".")


def apply_tuning_policy(model: EncoderModel, policy: TuningPolicy, head: str = "classifier") -> PartitionReport:
    """Set frozen flags (and Mixout) on ``model`` according to ``policy``.

    Under adapter tuning the trainable set is every adapter parameter, every
    layer-norm gain/bias and the active ``head``; everything else is frozen.
    """
    if head not in HEADS:
        raise ValueError(f"head must be one of {HEADS}, got {head!r}")
    if isinstance(policy.base, AdapterTuning):
        if not model.has_adapters:
            raise ValueError("adapter tuning requested but the model was built without adapters")
        if policy.base.adapter != model.adapters:
            raise ValueError(f"policy adapter config {policy.base.adapter} does not match model {model.adapters}")
    for name, p in model.params.items():
        p.frozen = not is_trainable(name, policy, head)
    for lin in model.linears():
        lin.mixout = policy.mixout if (policy.mixout is not None and not lin.weight.frozen) else None
    # mixout stands in for dropout everywhere
    model.use_dropout = policy.mixout is None
    names = list(model.params)
    return PartitionReport(
        trainable=tuple(n for n in names if not model.params[n].frozen),
        frozen=tuple(n for n in names if model.params[n].frozen),
    )


@dataclass(frozen=True)
class ParameterCount:
    count: int
    total: int

    @property
    def fraction(self) -> float:
        return self.count / self.total if self.total else 0.0


COUNT_FILTERS = ("all", "trainable", "frozen", "adapters")


def count_parameters(model: Union[EncoderModel, Mapping[str, tuple]], filter: str = "all") -> ParameterCount:
    """Exact parameter count under ``filter`` and its fraction of the total.

    ``model`` may also be a shape table from :func:`parameter_shapes`, which
    lets full-size configurations be counted without allocating them
    (only the ``all`` and ``adapters`` filters apply then).
    """
    if filter not in COUNT_FILTERS:
        raise ValueError(f"filter must be one of {COUNT_FILTERS}, got {filter!r}")
    if isinstance(model, EncoderModel):
        sizes = {n: p.size for n, p in model.params.items()}
        frozen = {n: p.frozen for n, p in model.params.items()}
    else:
        if filter in ("trainable", "frozen"):
            raise ValueError(f"filter {filter!r} needs a built model, not a shape table")
        sizes = {n: int(np.prod(s)) for n, s in model.items()}
        frozen = {}
    total = sum(sizes.values())
    if filter == "all":
        keep = sizes
    elif filter == "adapters":
        keep = {n: s for n, s in sizes.items() if is_adapter_param(n)}
    elif filter == "trainable":
        keep = {n: s for n, s in sizes.items() if not frozen[n]}
    else:
        keep = {n: s for n, s in sizes.items() if frozen[n]}
    return ParameterCount(sum(keep.values()), total)


def adapter_parameter_count(model_dim: int, num_layers: int, hidden_size: int, per_layer: int = 2) -> int:
    """Closed form: ``N * per_layer * (d*m + m + m*d + d)``."""
    d, m = model_dim, hidden_size
    return num_layers * per_layer * (d * m + m + m * d + d)
