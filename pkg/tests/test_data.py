import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adapterlab.data import (
    CLS_ID,
    MASK_ID,
    PAD_ID,
    SEP_ID,
    STRUCTURAL_IDS,
    UNK_ID,
    LabeledExample,
    SyntheticTaskSpec,
    Vocabulary,
    generate_synthetic_task,
    keyword_lookup_predict,
    load_corpus,
    load_task_dir,
    markov_corpus,
    mask_for_mlm,
    pad_batch,
    subsample_indices,
    subsample_low_resource,
    synthetic_corpus,
    tokenize_corpus,
    write_task_dir,
)

words = st.text(alphabet="abcXYZ", min_size=1, max_size=4)
lines = st.lists(st.lists(words, min_size=1, max_size=6).map(" ".join), min_size=1, max_size=8)


# -- vocabulary ---------------------------------------------------------------


def test_reserved_ids():
    assert (PAD_ID, CLS_ID, SEP_ID, MASK_ID, UNK_ID) == (0, 1, 2, 3, 4)
    vocab, _ = tokenize_corpus(["a b"])
    assert vocab.tokens[:5] == ["[PAD]", "[CLS]", "[SEP]", "[MASK]", "[UNK]"]


def test_case_folding():
    vocab, (a, b) = tokenize_corpus(["The cat", "the CAT"])
    assert a == b


def test_min_freq_cutoff_maps_to_unk():
    vocab, encoded = tokenize_corpus(["common common rare"], min_freq=2)
    assert encoded[0] == [CLS_ID, vocab.id_of("common"), vocab.id_of("common"), UNK_ID, SEP_ID]
    assert "rare" not in vocab


def test_ids_ordered_by_frequency_then_alphabet():
    vocab, _ = tokenize_corpus(["b a b c c c"])
    assert vocab.tokens[5:] == ["c", "b", "a"]


@settings(max_examples=40, deadline=None)
@given(lines)
def test_vocabulary_deterministic_and_round_trips(corpus):
    v1, enc1 = tokenize_corpus(corpus)
    v2, enc2 = tokenize_corpus(corpus)
    assert v1 == v2 and enc1 == enc2
    for line, ids in zip(corpus, enc1):
        assert ids[0] == CLS_ID and ids[-1] == SEP_ID
        assert v1.decode(ids) == line.lower().split()
    assert Vocabulary.from_dict(v1.to_dict()) == v1


def test_truncation_keeps_cls_and_sep():
    vocab, (ids,) = tokenize_corpus(["a b c d e f"], max_len=4)
    assert len(ids) == 4 and ids[0] == CLS_ID and ids[-1] == SEP_ID


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        tokenize_corpus(["", "   "])


def test_labeled_example_invariants():
    LabeledExample((1, 7, 2), 0)
    with pytest.raises(ValueError):
        LabeledExample((7, 2), 0)
    with pytest.raises(ValueError):
        LabeledExample((1, 0, 2), 0)


def test_pad_batch_pads_suffix():
    out = pad_batch([(1, 5, 2), (1, 2)])
    np.testing.assert_array_equal(out, [[1, 5, 2], [1, 2, 0]])


# -- files ---------------------------------------------------------------------


def test_task_dir_round_trip(tmp_path):
    ds = generate_synthetic_task(SyntheticTaskSpec(vocab_size=30, seed=2), sizes=(20, 5, 5))
    write_task_dir(ds, tmp_path)
    again = load_task_dir(tmp_path, vocab=ds.vocab)
    assert again.train == ds.train and again.test == ds.test
    assert again.label_names == ds.label_names


def test_task_dir_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_task_dir(tmp_path)
    for split in ("train", "dev", "test"):
        (tmp_path / f"{split}.tsv").write_text("no label column\n")
    with pytest.raises(ValueError, match="text<TAB>label"):
        load_task_dir(tmp_path)


def test_load_corpus(tmp_path):
    f = tmp_path / "c.txt"
    f.write_text("a b\n\nb c\n")
    vocab, docs = load_corpus(f)
    assert len(docs) == 2 and docs[0][0] == CLS_ID


# -- subsampling ------------------------------------------------------------------


def test_subsample_exact_size_and_determinism():
    labels = np.random.default_rng(0).integers(0, 2, size=67_000)
    a = subsample_indices(labels, 1000, seed=3)
    assert len(a) == 1000 and len(set(a)) == 1000
    np.testing.assert_array_equal(a, subsample_indices(labels, 1000, seed=3))
    assert not np.array_equal(a, subsample_indices(labels, 1000, seed=4))


def test_subsample_full_size_is_everything():
    ds = generate_synthetic_task(SyntheticTaskSpec(vocab_size=30), sizes=(40, 5, 5))
    sub = subsample_low_resource(ds, 40, seed=1)
    assert sorted(map(repr, sub.train)) == sorted(map(repr, ds.train))
    assert sub.dev == ds.dev and sub.test == ds.test


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.integers(0, 10_000), st.booleans())
def test_subsample_is_subset_without_duplicates(k, seed, stratified):
    labels = np.random.default_rng(seed).integers(0, 3, size=60)
    idx = subsample_indices(labels, k, seed, stratified)
    assert len(idx) == k == len(set(idx.tolist()))
    assert idx.min() >= 0 and idx.max() < 60


def test_stratified_subsample_keeps_proportions():
    labels = np.array([0] * 90 + [1] * 10)
    idx = subsample_indices(labels, 20, seed=0, stratified=True)
    assert np.bincount(labels[idx]).tolist() == [18, 2]


def test_subsample_rejects_oversized_k():
    with pytest.raises(ValueError):
        subsample_indices([0, 1], 3, seed=0)


# -- masking ----------------------------------------------------------------------


def test_mask_rate_matches_binomial_expectation():
    rng = np.random.default_rng(0)
    batch = rng.integers(5, 50, size=(1000, 100))
    masked = mask_for_mlm(batch, 1, 50)
    assert abs(masked.positions.size / batch.size - 0.15) < 0.005


def test_masking_never_touches_structural_tokens():
    batch = pad_batch([(1, 7, 8, 9, 2), (1, 7, 2)])
    for seed in range(200):
        m = mask_for_mlm(batch, seed, 20, probability=0.9)
        flat = batch.reshape(-1)
        assert not np.isin(flat[m.positions], list(STRUCTURAL_IDS)).any()
        structural = np.isin(batch, list(STRUCTURAL_IDS))
        np.testing.assert_array_equal(m.input_ids[structural], batch[structural])
        assert m.input_ids.shape == batch.shape


def test_mask_split_between_mask_random_and_keep():
    batch = np.full((2000, 50), 7)
    m = mask_for_mlm(batch, 3, 50)
    chosen = m.input_ids.reshape(-1)[m.positions]
    frac_mask = np.mean(chosen == MASK_ID)
    frac_keep = np.mean(chosen == 7)
    assert abs(frac_mask - 0.8) < 0.01
    # kept tokens include random draws that happen to hit 7
    assert abs(frac_keep - (0.1 + 0.1 / 45)) < 0.01
    assert chosen.min() >= 3


def test_empty_selection_on_tiny_batch():
    m = mask_for_mlm(np.array([[1, 2]]), 0, 20)
    assert m.empty and m.targets.size == 0


def test_masking_deterministic_per_seed():
    batch = np.random.default_rng(0).integers(5, 40, size=(8, 10))
    a, b = mask_for_mlm(batch, 11, 40), mask_for_mlm(batch, 11, 40)
    np.testing.assert_array_equal(a.input_ids, b.input_ids)
    np.testing.assert_array_equal(a.positions, b.positions)


# -- synthetic tasks ----------------------------------------------------------------


def test_noise_free_task_solved_by_keyword_lookup():
    spec = SyntheticTaskSpec(vocab_size=40, num_classes=3, seed=5)
    ds = generate_synthetic_task(spec, sizes=(50, 50, 300))
    assert all(keyword_lookup_predict(spec, e.ids) == e.label for e in ds.test)


def test_half_label_noise_caps_accuracy():
    spec = SyntheticTaskSpec(vocab_size=40, num_classes=2, label_noise=0.5, seed=5)
    ds = generate_synthetic_task(spec, sizes=(50, 50, 4000))
    acc = np.mean([keyword_lookup_predict(spec, e.ids) == e.label for e in ds.test])
    assert spec.bayes_accuracy() == 0.75
    assert abs(acc - 0.75) < 0.03


def test_synthetic_task_deterministic():
    spec = SyntheticTaskSpec(seed=9)
    assert generate_synthetic_task(spec) == generate_synthetic_task(spec)


def test_infeasible_spec_rejected():
    with pytest.raises(ValueError, match="infeasible"):
        generate_synthetic_task(SyntheticTaskSpec(vocab_size=10, keywords_per_class=3))


def test_corpus_streams_differ_from_task_splits():
    spec = SyntheticTaskSpec(seed=1)
    corpus = synthetic_corpus(spec, 50)
    train = [e.ids for e in generate_synthetic_task(spec, sizes=(50, 1, 1)).train]
    assert corpus != train
    assert corpus == synthetic_corpus(spec, 50)


def test_markov_corpus_follows_its_successor_table():
    docs = markov_corpus(30, 200, branching=2, seed=0)
    successors = {}
    for d in docs:
        for a, b in zip(d[1:-2], d[2:-1]):
            successors.setdefault(a, set()).add(b)
    assert max(len(s) for s in successors.values()) <= 2
    assert all(d[0] == CLS_ID and d[-1] == SEP_ID for d in docs)
