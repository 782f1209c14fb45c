"""Keyword-driven synthetic classification tasks.

Each class owns a disjoint block of keyword ids; every other ordinary id is
background.  An example draws a class, a length, a few keywords of that class
and background filler, in shuffled order.  Label noise resamples the label
uniformly over all classes, so with rate ``r`` the best achievable accuracy is
``1 - r + r / num_classes``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

import numpy as np

from .._rng import derive_rng
from .dataset import LabeledExample, TaskDataset
from .vocab import CLS_ID, NUM_RESERVED, RESERVED, SEP_ID, Vocabulary


@dataclass(frozen=True)
class SyntheticTaskSpec:
    vocab_size: int = 64
    num_classes: int = 2
    keywords_per_class: int = 4
    min_len: int = 6
    max_len: int = 12
    min_keywords: int = 1
    max_keywords: int = 2
    label_noise: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ValueError("need at least two classes")
        if not 0.0 <= self.label_noise < 1.0:
            raise ValueError(f"label_noise must lie in [0, 1), got {self.label_noise}")
        if not 1 <= self.min_len <= self.max_len:
            raise ValueError("need 1 <= min_len <= max_len")
        if not 1 <= self.min_keywords <= self.max_keywords <= self.min_len:
            raise ValueError("need 1 <= min_keywords <= max_keywords <= min_len")
        if self.keywords_per_class < 1:
            raise ValueError("keywords_per_class must be positive")
        used = NUM_RESERVED + self.num_classes * self.keywords_per_class
        if used >= self.vocab_size:
            raise ValueError(
                f"infeasible spec: {self.num_classes} x {self.keywords_per_class} keywords plus "
                f"{NUM_RESERVED} reserved ids leave no background tokens in a vocabulary of {self.vocab_size}"
            )

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()[:16]

    def keyword_ids(self, cls: int) -> np.ndarray:
        start = NUM_RESERVED + cls * self.keywords_per_class
        return np.arange(start, start + self.keywords_per_class)

    def background_ids(self) -> np.ndarray:
        return np.arange(NUM_RESERVED + self.num_classes * self.keywords_per_class, self.vocab_size)

    def bayes_accuracy(self) -> float:
        return 1.0 - self.label_noise + self.label_noise / self.num_classes


def synthetic_vocabulary(vocab_size: int) -> Vocabulary:
    return Vocabulary([*RESERVED, *(f"tok{i}" for i in range(NUM_RESERVED, vocab_size))])


def _draw_split(spec: SyntheticTaskSpec, n: int, rng: np.random.Generator) -> list:
    background = spec.background_ids()
    out = []
    for _ in range(n):
        label = int(rng.integers(spec.num_classes))
        length = int(rng.integers(spec.min_len, spec.max_len + 1))
        n_kw = int(rng.integers(spec.min_keywords, spec.max_keywords + 1))
        words = np.concatenate(
            [rng.choice(spec.keyword_ids(label), size=n_kw), rng.choice(background, size=length - n_kw)]
        )
        rng.shuffle(words)
        if rng.random() < spec.label_noise:
            label = int(rng.integers(spec.num_classes))
        out.append(LabeledExample((CLS_ID, *(int(w) for w in words), SEP_ID), label))
    return out


def generate_synthetic_task(spec: SyntheticTaskSpec, sizes=(1000, 200, 200)) -> TaskDataset:
    """Deterministic under ``spec.seed``; ``sizes`` are (train, dev, test)."""
    spec.validate()
    if len(sizes) != 3 or min(sizes) <= 0:
        raise ValueError(f"sizes must be three positive split sizes, got {sizes}")
    splits = {
        name: _draw_split(spec, n, derive_rng(spec.seed, f"synthetic:{name}"))
        for name, n in zip(("train", "dev", "test"), sizes)
    }
    return TaskDataset(
        **splits,
        label_names=[f"class{c}" for c in range(spec.num_classes)],
        vocab=synthetic_vocabulary(spec.vocab_size),
        provenance=f"synthetic:{spec.digest()}",
        extra={"spec": asdict(spec)},
    )


def synthetic_corpus(spec: SyntheticTaskSpec, n: int, stream: int = 0) -> list:
    """Unlabeled documents from the same generator, on a stream disjoint from the task splits."""
    spec.validate()
    return [ex.ids for ex in _draw_split(spec, n, derive_rng(spec.seed, "synthetic:corpus", stream))]


def markov_corpus(vocab_size: int, n: int, branching: int = 2, min_len: int = 6, max_len: int = 12, seed: int = 0) -> list:
    """Documents from a sparse first-order chain over the ordinary ids.

    Every ordinary id has ``branching`` allowed successors, so a masked token
    is largely predictable from its neighbours: a corpus on which masked-LM
    training has something to learn.
    """
    ordinary = np.arange(NUM_RESERVED, vocab_size)
    if ordinary.size < 2 or not 1 <= branching < ordinary.size:
        raise ValueError(f"need 1 <= branching < {ordinary.size} ordinary ids")
    if not 1 <= min_len <= max_len:
        raise ValueError("need 1 <= min_len <= max_len")
    rng = derive_rng(seed, "markov-corpus")
    successors = np.stack([rng.choice(ordinary, size=branching, replace=False) for _ in ordinary])
    docs = []
    for _ in range(n):
        length = int(rng.integers(min_len, max_len + 1))
        tok = int(rng.choice(ordinary))
        words = [tok]
        for _ in range(length - 1):
            tok = int(rng.choice(successors[tok - NUM_RESERVED]))
            words.append(tok)
        docs.append((CLS_ID, *words, SEP_ID))
    return docs


def keyword_lookup_predict(spec: SyntheticTaskSpec, ids) -> int:
    """Reference classifier: the class whose keywords occur most often (ties to the lowest id)."""
    ids = np.asarray(ids)
    hits = [np.isin(ids, spec.keyword_ids(c)).sum() for c in range(spec.num_classes)]
    return int(np.argmax(hits))
