"""Whitespace vocabulary with fixed reserved ids."""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Optional, Sequence

PAD, CLS, SEP, MASK, UNK = "[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"
RESERVED = (PAD, CLS, SEP, MASK, UNK)
PAD_ID, CLS_ID, SEP_ID, MASK_ID, UNK_ID = range(5)
NUM_RESERVED = len(RESERVED)
# never selected for MLM targets nor for RSA token sampling
STRUCTURAL_IDS = frozenset({PAD_ID, CLS_ID, SEP_ID})


def split_text(text: str) -> list[str]:
    return text.lower().split()


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[:NUM_RESERVED]) != RESERVED:
            raise ValueError(f"vocabulary must start with the reserved tokens {RESERVED}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    def __len__(self):
        return len(self.tokens)

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __contains__(self, token):
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def encode_tokens(self, words: Iterable[str], max_len: Optional[int] = None) -> list[int]:
        """``[CLS] w1 .. wk [SEP]``, truncating words so the total fits ``max_len``."""
        ids = [self.id_of(w) for w in words]
        if max_len is not None:
            if max_len < 2:
                raise ValueError("max_len must leave room for [CLS] and [SEP]")
            ids = ids[: max_len - 2]
        return [CLS_ID, *ids, SEP_ID]

    def encode(self, text: str, max_len: Optional[int] = None) -> list[int]:
        return self.encode_tokens(split_text(text), max_len)

    def decode(self, ids: Iterable[int], skip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if skip_special and i in STRUCTURAL_IDS:
                continue
            out.append(self.tokens[i])
        return out

    def to_dict(self) -> dict:
        return {"tokens": self.tokens}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(d["tokens"])

    @classmethod
    def from_counts(cls, counts: Counter, min_freq: int = 1, max_size: Optional[int] = None) -> "Vocabulary":
        kept = sorted((t for t, c in counts.items() if c >= min_freq and t not in RESERVED), key=lambda t: (-counts[t], t))
        if max_size is not None:
            kept = kept[: max(0, max_size - NUM_RESERVED)]
        return cls([*RESERVED, *kept])


def tokenize_corpus(
    lines: Iterable[str], min_freq: int = 1, max_size: Optional[int] = None, max_len: Optional[int] = None
) -> tuple[Vocabulary, list[list[int]]]:
    """Build a vocabulary from ``lines`` and encode every line with it.

    Lowercased whitespace tokens; tokens seen fewer than ``min_freq`` times
    map to [UNK].  Ids are assigned by descending frequency, ties broken
    alphabetically.
    """
    split = [split_text(line) for line in lines]
    if not split or not any(split):
        raise ValueError("cannot build a vocabulary from an empty corpus")
    vocab = Vocabulary.from_counts(Counter(w for words in split for w in words), min_freq, max_size)
    return vocab, [vocab.encode_tokens(words, max_len) for words in split]
