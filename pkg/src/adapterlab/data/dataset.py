"""Labeled task datasets, TSV I/O and low-resource subsampling."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .._rng import derive_rng
from .vocab import CLS_ID, PAD_ID, SEP_ID, Vocabulary, split_text, tokenize_corpus

SPLITS = ("train", "dev", "test")


@dataclass(frozen=True)
class LabeledExample:
    """Unpadded ids (``[CLS] ... [SEP]``) and a dense label id."""

    ids: tuple
    label: int

    def __post_init__(self):
        if not self.ids or self.ids[0] != CLS_ID or self.ids[-1] != SEP_ID:
            raise ValueError("example ids must begin with [CLS] and end with [SEP]")
        if CLS_ID in self.ids[1:] or PAD_ID in self.ids:
            raise ValueError("example ids contain a stray [CLS] or [PAD]")


@dataclass
class TaskDataset:
    train: list
    dev: list
    test: list
    label_names: list
    vocab: Optional[Vocabulary] = None
    provenance: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.label_names)
        for split in SPLITS:
            for ex in getattr(self, split):
                if not 0 <= ex.label < n:
                    raise ValueError(f"{split} label {ex.label} outside [0, {n})")

    @property
    def num_classes(self) -> int:
        return len(self.label_names)

    def split(self, name: str) -> list:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}; expected one of {SPLITS}")
        return getattr(self, name)


def pad_batch(seqs: Sequence[Sequence[int]]) -> np.ndarray:
    """Right-pad id sequences with [PAD] to the longest one."""
    width = max(len(s) for s in seqs)
    out = np.full((len(seqs), width), PAD_ID, dtype=np.int64)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
    return out


def collate(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    return pad_batch([e.ids for e in examples]), np.array([e.label for e in examples], dtype=np.int64)


def _read_tsv(path: Path) -> list[tuple[str, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            text, sep, label = line.rpartition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: expected 'text<TAB>label'")
            rows.append((text, label.strip()))
    return rows


def load_task_dir(
    path, min_freq: int = 1, max_len: Optional[int] = None, vocab: Optional[Vocabulary] = None
) -> TaskDataset:
    """Read ``train.tsv``, ``dev.tsv`` and ``test.tsv`` from ``path``.

    The vocabulary is built from the training texts unless one is given.
    Label ids follow the sorted label strings.
    """
    path = Path(path)
    rows = {}
    for split in SPLITS:
        f = path / f"{split}.tsv"
        if not f.exists():
            raise FileNotFoundError(f"missing split file {f}")
        rows[split] = _read_tsv(f)
    if not rows["train"]:
        raise ValueError(f"{path / 'train.tsv'} has no examples")
    if vocab is None:
        vocab, _ = tokenize_corpus([t for t, _ in rows["train"]], min_freq=min_freq)
    labels = sorted({lab for split in SPLITS for _, lab in rows[split]})
    label_id = {lab: i for i, lab in enumerate(labels)}
    splits = {
        split: [LabeledExample(tuple(vocab.encode(t, max_len)), label_id[lab]) for t, lab in rows[split]]
        for split in SPLITS
    }
    return TaskDataset(**splits, label_names=labels, vocab=vocab, provenance=str(path.resolve()))


def write_task_dir(dataset: TaskDataset, path) -> None:
    if dataset.vocab is None:
        raise ValueError("writing TSV needs the dataset vocabulary to decode ids")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for split in SPLITS:
        with open(path / f"{split}.tsv", "w", encoding="utf-8") as fh:
            for ex in dataset.split(split):
                text = " ".join(dataset.vocab.decode(ex.ids))
                fh.write(f"{text}\t{dataset.label_names[ex.label]}\n")


def load_corpus(path, vocab: Optional[Vocabulary] = None, min_freq: int = 1, max_len: Optional[int] = None):
    """One document per line; returns ``(vocab, encoded documents)``."""
    with open(path, encoding="utf-8") as fh:
        lines = [line for line in fh if split_text(line)]
    if vocab is None:
        return tokenize_corpus(lines, min_freq=min_freq, max_len=max_len)
    if not lines:
        raise ValueError(f"{path} has no documents")
    return vocab, [vocab.encode(line, max_len) for line in lines]


def subsample_indices(labels: Sequence[int], k: int, seed: int, stratified: bool = False) -> np.ndarray:
    n = len(labels)
    if not 0 < k <= n:
        raise ValueError(f"cannot sample k={k} examples from a training split of {n}")
    rng = derive_rng(seed, "subsample")
    if not stratified:
        return np.sort(rng.choice(n, size=k, replace=False))
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    quota = counts * k / n
    take = np.floor(quota).astype(int)
    # largest remainders get the leftover slots
    for i in np.argsort(-(quota - take), kind="stable")[: k - take.sum()]:
        take[i] += 1
    picked = [rng.choice(np.flatnonzero(labels == c), size=t, replace=False) for c, t in zip(classes, take)]
    return np.sort(np.concatenate(picked))


def subsample_low_resource(dataset: TaskDataset, k: int, seed: int, stratified: bool = False) -> TaskDataset:
    """Keep ``k`` random training examples; dev and test are untouched."""
    idx = subsample_indices([e.label for e in dataset.train], k, seed, stratified)
    note = f"{dataset.provenance} | subsample k={k} seed={seed}{' stratified' if stratified else ''}"
    return replace(dataset, train=[dataset.train[i] for i in idx], provenance=note)
