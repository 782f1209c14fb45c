"""Representational similarity between layer activations of two models.

Tokens are sampled once per comparison group; every model is then read out
at the same (example, position) pairs so the rows line up.  Similarity is
the Pearson correlation of the strict upper triangles of the two cosine
similarity matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .. import kernels
from .._rng import derive_rng
from ..data.dataset import LabeledExample, pad_batch
from ..data.vocab import STRUCTURAL_IDS
from ..model import EncoderModel


class RSASampleWarning(UserWarning):
    """Fewer eligible tokens than requested; all of them were used."""


@dataclass(frozen=True)
class RSAConfig:
    sample_size: int = 512
    seed: int = 0
    skip_tokens: frozenset = field(default_factory=lambda: frozenset(STRUCTURAL_IDS))

    def __post_init__(self):
        if self.sample_size < 3:
            raise ValueError(f"sample_size must be at least 3, got {self.sample_size}")


@dataclass
class RepresentationSet:
    source: str
    layers: list
    pairs: np.ndarray
    requested: int = 0
    warning: Optional[str] = None

    @property
    def n(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class RSAResult:
    scores: tuple

    def __post_init__(self):
        for s in self.scores:
            if not -1.0 <= s <= 1.0:
                raise ValueError(f"RSA score {s} outside [-1, 1]")

    def mean(self, layers=None) -> float:
        picked = self.scores if layers is None else [self.scores[i] for i in layers]
        return float(np.mean(picked))

    def upper_half(self) -> float:
        """Mean over transformer layers ``N//2+1 .. N`` (entry 0 is the embedding output)."""
        n = len(self.scores) - 1
        return self.mean(range(n // 2 + 1, n + 1))


def _token_ids(example) -> tuple:
    return example.ids if isinstance(example, LabeledExample) else tuple(example)


def sample_pairs(split: Sequence, cfg: RSAConfig) -> tuple[np.ndarray, Optional[str]]:
    eligible = [
        (i, j) for i, ex in enumerate(split) for j, tok in enumerate(_token_ids(ex)) if tok not in cfg.skip_tokens
    ]
    if len(eligible) < 3:
        raise ValueError(f"only {len(eligible)} eligible tokens; RSA needs at least 3")
    eligible = np.array(eligible, dtype=np.int64)
    note = None
    if len(eligible) < cfg.sample_size:
        note = f"requested {cfg.sample_size} tokens but only {len(eligible)} are eligible; using all"
        warnings.warn(note, RSASampleWarning, stacklevel=3)
        return eligible, note
    rng = derive_rng(cfg.seed, "rsa-sample")
    pick = np.sort(rng.choice(len(eligible), size=cfg.sample_size, replace=False))
    return eligible[pick], note


def collect_representations(
    model: EncoderModel,
    split: Sequence,
    cfg: RSAConfig = RSAConfig(),
    pairs: Optional[np.ndarray] = None,
    source: str = "model",
    batch_size: int = 64,
) -> RepresentationSet:
    """Per-layer token representations at sampled positions (eval mode).

    Pass the ``pairs`` of an earlier set to read a second model at the same
    tokens.
    """
    note = None
    if pairs is None:
        pairs, note = sample_pairs(split, cfg)
    pairs = np.asarray(pairs, dtype=np.int64)
    examples = np.unique(pairs[:, 0])
    layers = None
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        ids = pad_batch([_token_ids(split[i]) for i in chunk])
        hidden, _ = model.forward(ids, "eval")
        if layers is None:
            layers = [np.empty((len(pairs), h.shape[-1])) for h in hidden]
        rows = np.nonzero(np.isin(pairs[:, 0], chunk))[0]
        local = np.searchsorted(chunk, pairs[rows, 0])
        for out, h in zip(layers, hidden):
            out[rows] = h.data[local, pairs[rows, 1]]
    return RepresentationSet(source, layers, pairs, cfg.sample_size, note)


def cosine_matrix(a: np.ndarray, name: str = "A") -> np.ndarray:
    norms = np.linalg.norm(a, axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise ValueError(f"row {int(zero[0])} of {name} has zero norm; cosine similarity undefined")
    u = a / norms[:, None]
    return u @ u.T


def rsa_score(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("rsa_score expects two 2-D matrices")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 3:
        raise ValueError(f"need at least 3 rows, got {a.shape[0]}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("representations contain non-finite values")
    r = kernels.upper_triangle_pearson(cosine_matrix(a, "A"), cosine_matrix(b, "B"))
    if np.isnan(r):
        raise ValueError("a similarity triangle has zero variance; correlation undefined")
    return float(r)


def compare(reference: RepresentationSet, other: RepresentationSet) -> RSAResult:
    if not np.array_equal(reference.pairs, other.pairs):
        raise ValueError("representation sets were sampled at different tokens")
    if len(reference.layers) != len(other.layers):
        raise ValueError(f"layer counts differ: {len(reference.layers)} vs {len(other.layers)}")
    return RSAResult(tuple(rsa_score(a, b) for a, b in zip(reference.layers, other.layers)))


def rsa_to_reference(reference: EncoderModel, model: EncoderModel, split: Sequence, cfg: RSAConfig = RSAConfig()) -> RSAResult:
    """Per-layer RSA of ``model`` against ``reference`` on one shared token sample."""
    ref = collect_representations(reference, split, cfg, source="reference")
    return compare(ref, collect_representations(model, split, cfg, pairs=ref.pairs))
