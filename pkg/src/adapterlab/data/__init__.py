from .dataset import (
    SPLITS,
    LabeledExample,
    TaskDataset,
    collate,
    load_corpus,
    load_task_dir,
    pad_batch,
    subsample_indices,
    subsample_low_resource,
    write_task_dir,
)
from .masking import MaskedBatch, mask_for_mlm
from .synthetic import (
    SyntheticTaskSpec,
    generate_synthetic_task,
    keyword_lookup_predict,
    markov_corpus,
    synthetic_corpus,
    synthetic_vocabulary,
)
from .vocab import (
    CLS_ID,
    MASK_ID,
    NUM_RESERVED,
    PAD_ID,
    RESERVED,
    SEP_ID,
    STRUCTURAL_IDS,
    UNK_ID,
    Vocabulary,
    tokenize_corpus,
)

__all__ = [
    "CLS_ID",
    "LabeledExample",
    "MASK_ID",
    "MaskedBatch",
    "NUM_RESERVED",
    "PAD_ID",
    "RESERVED",
    "SEP_ID",
    "SPLITS",
    "STRUCTURAL_IDS",
    "SyntheticTaskSpec",
    "TaskDataset",
    "UNK_ID",
    "Vocabulary",
    "collate",
    "generate_synthetic_task",
    "keyword_lookup_predict",
    "load_corpus",
    "load_task_dir",
    "markov_corpus",
    "mask_for_mlm",
    "pad_batch",
    "subsample_indices",
    "subsample_low_resource",
    "synthetic_corpus",
    "synthetic_vocabulary",
    "tokenize_corpus",
    "write_task_dir",
]
