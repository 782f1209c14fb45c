import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy.stats import ortho_group, pearsonr

from adapterlab import AdapterConfig, EncoderModel, TransformerConfig
from adapterlab.analysis import (
    DEFAULT_GRID,
    DEFAULT_LRS,
    LandscapeCurve,
    ModelSnapshot,
    RSAConfig,
    RSAResult,
    RSASampleWarning,
    SweepCell,
    SweepResult,
    collect_representations,
    gather,
    iqr,
    landscape_from_model,
    loss_landscape,
    lr_sweep,
    module_of,
    parameter_deviation,
    quartiles,
    rsa_score,
    rsa_to_reference,
    sample_pairs,
    scatter,
    split_loss,
)
from adapterlab.data import PAD_ID, SyntheticTaskSpec, generate_synthetic_task
from adapterlab.tuning import TrainConfig, TuningPolicy, evaluate, train

TOY = TransformerConfig(num_layers=2, model_dim=16, num_heads=2, ffn_dim=32, vocab_size=24, max_seq_len=16)
TASK = SyntheticTaskSpec(vocab_size=24, num_classes=2, keywords_per_class=3, seed=4)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(3, 8), st.integers(2, 5)).flatmap(
    lambda s: hnp.arrays(np.float64, s, elements=finite)
)


def nondegenerate(a):
    if np.any(np.linalg.norm(a, axis=1) < 1e-3):
        return False
    u = a / np.linalg.norm(a, axis=1, keepdims=True)
    tri = (u @ u.T)[np.triu_indices(len(a), 1)]
    return np.ptp(tri) > 1e-6


def brute_rsa(a, b):
    def cos(x):
        n = len(x)
        return [
            x[i] @ x[j] / (np.linalg.norm(x[i]) * np.linalg.norm(x[j])) for i in range(n) for j in range(i + 1, n)
        ]

    return pearsonr(cos(a), cos(b))[0]


@pytest.fixture(scope="module")
def task():
    return generate_synthetic_task(TASK, sizes=(48, 16, 24))


# -- RSA --------------------------------------------------------------------------


def test_rsa_hand_example():
    a = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert abs(rsa_score(a, b) + 1.0) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_rsa_identity_and_sign_flip(a):
    if not nondegenerate(a):
        return
    assert abs(rsa_score(a, a) - 1.0) <= 1e-9
    assert rsa_score(a, -a) == rsa_score(a, a)


@settings(max_examples=40, deadline=None)
@given(matrices, st.integers(0, 2**31 - 1))
def test_rsa_orthogonal_rotation_invariance(a, seed):
    if not nondegenerate(a):
        return
    r = ortho_group.rvs(a.shape[1], random_state=seed) if a.shape[1] > 1 else np.array([[-1.0]])
    assert abs(rsa_score(a, a @ r) - 1.0) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(matrices, st.integers(0, 2**31 - 1))
def test_rsa_positive_row_scaling_invariance(a, seed):
    if not nondegenerate(a):
        return
    scales = np.random.default_rng(seed).uniform(0.1, 10.0, size=(len(a), 1))
    assert abs(rsa_score(a, a * scales) - 1.0) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(matrices, st.integers(0, 2**31 - 1))
def test_rsa_symmetric_bounded_and_matches_brute_force(a, seed):
    b = np.random.default_rng(seed).normal(size=(len(a), 3))
    if not (nondegenerate(a) and nondegenerate(b)):
        return
    s = rsa_score(a, b)
    assert s == rsa_score(b, a)
    assert -1.0 <= s <= 1.0
    assert abs(s - brute_rsa(a, b)) <= 1e-9


def test_rsa_different_widths_allowed():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(10, 4))
    b = np.hstack([a, np.zeros((10, 3))])
    assert abs(rsa_score(a, b) - 1.0) <= 1e-12


def test_rsa_zero_row_named():
    a = np.array([[1.0, 0.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(ValueError, match="row 1 of A"):
        rsa_score(a, np.eye(3)[:, :2] + 1)
    with pytest.raises(ValueError, match="row 1 of B"):
        rsa_score(np.eye(3), a)


def test_rsa_zero_variance_triangle():
    constant = np.ones((4, 2))
    with pytest.raises(ValueError, match="zero variance"):
        rsa_score(constant, np.random.default_rng(0).normal(size=(4, 2)))


def test_rsa_shape_errors():
    with pytest.raises(ValueError, match="row counts"):
        rsa_score(np.ones((3, 2)), np.ones((4, 2)))
    with pytest.raises(ValueError, match="at least 3"):
        rsa_score(np.eye(2), np.eye(2))


def test_rsa_config_and_result_bounds():
    with pytest.raises(ValueError):
        RSAConfig(sample_size=2)
    with pytest.raises(ValueError):
        RSAResult((0.5, 1.5))
    r = RSAResult((1.0, 0.8, 0.6, 0.4, 0.2))
    assert r.upper_half() == pytest.approx(0.3)


def test_sampling_warns_and_uses_all_tokens():
    split = [(1, 7, 8, 2), (1, 9, 10, 11, 2, 0, 0)]
    with pytest.warns(RSASampleWarning):
        pairs, note = sample_pairs(split, RSAConfig(sample_size=512))
    assert len(pairs) == 5 and "only 5" in note


def test_sampling_fails_below_three_tokens():
    with pytest.raises(ValueError, match="at least 3"):
        sample_pairs([(1, 7, 2), (1, 8, 2)], RSAConfig(sample_size=3))


def test_sampling_deterministic_and_skips_specials(task):
    cfg = RSAConfig(sample_size=50, seed=3)
    a, _ = sample_pairs(task.test, cfg)
    b, _ = sample_pairs(task.test, cfg)
    np.testing.assert_array_equal(a, b)
    assert len({tuple(p) for p in a}) == 50
    toks = [task.test[i].ids[j] for i, j in a]
    assert PAD_ID not in toks and 1 not in toks and 2 not in toks
    c, _ = sample_pairs(task.test, RSAConfig(sample_size=50, seed=4))
    assert not np.array_equal(a, c)


def test_representations_share_rows_across_layers(task):
    model = EncoderModel(TOY, seed=0)
    reps = collect_representations(model, task.test, RSAConfig(sample_size=40))
    assert len(reps.layers) == TOY.num_layers + 1
    assert all(l.shape == (40, TOY.model_dim) for l in reps.layers)
    # rows equal a direct unpadded forward of each sampled token
    i, j = reps.pairs[5]
    hidden, _ = model.forward(np.array([task.test[i].ids]), "eval")
    np.testing.assert_allclose(reps.layers[-1][5], hidden[-1].data[0, j], atol=1e-12)


def test_rsa_of_model_with_itself_is_one(task):
    model = EncoderModel(TOY, seed=0)
    r = rsa_to_reference(model, model.copy(), task.test, RSAConfig(sample_size=40))
    assert all(abs(s - 1.0) <= 1e-9 for s in r.scores)


# -- snapshots ----------------------------------------------------------------------


def test_snapshot_round_trip_bit_exact():
    model = EncoderModel(TOY, adapters=AdapterConfig(4), seed=1)
    snap = gather(model)
    other = EncoderModel(TOY, adapters=AdapterConfig(4), seed=2)
    scatter(snap, other)
    for name, p in model.params.items():
        assert p.data.tobytes() == other.params[name].data.tobytes()
    assert gather(other).vector.tobytes() == snap.vector.tobytes()


def test_snapshot_is_not_aliased():
    model = EncoderModel(TOY, seed=1)
    snap = gather(model)
    model.params["classifier.bias"].data += 1.0
    assert not np.array_equal(snap.get("classifier.bias"), model.params["classifier.bias"].data)


def test_snapshot_layout_mismatch_named():
    plain = gather(EncoderModel(TOY, seed=1))
    with_adapters = EncoderModel(TOY, adapters=AdapterConfig(4), seed=1)
    with pytest.raises(ValueError, match="parameter"):
        scatter(plain, with_adapters)


# -- landscape ----------------------------------------------------------------------


def test_default_grid():
    assert len(DEFAULT_GRID) == 21
    assert DEFAULT_GRID[0] == -2.0 and DEFAULT_GRID[-1] == 2.0
    assert 0.0 in DEFAULT_GRID and 1.0 in DEFAULT_GRID
    np.testing.assert_allclose(np.diff(DEFAULT_GRID), 0.2)


def test_landscape_endpoints_and_restore(task):
    model = EncoderModel(TOY, seed=0)
    train(model, task, TuningPolicy.from_name("finetune"), TrainConfig(epochs=2, batch_size=8, peak_lr=1e-3))
    theta1 = gather(model)
    loss1 = split_loss(model, task.train)
    curve = landscape_from_model(model, task.train)
    assert gather(model).vector.tobytes() == theta1.vector.tobytes()
    fresh = EncoderModel(TOY, seed=0)
    loss0 = split_loss(fresh, task.train)
    assert abs(curve.at(0.0) - loss0) <= 1e-8 * abs(loss0)
    assert abs(curve.at(1.0) - loss1) <= 1e-8 * abs(loss1)
    assert len(curve.alphas) == len(curve.losses) == 21
    assert all(np.isfinite(curve.losses))


def test_landscape_custom_grid_and_mismatch(task):
    model = EncoderModel(TOY, seed=0)
    curve = loss_landscape(model, gather(model), gather(model), task.dev, grid=[-1.0, 0.5])
    assert curve.alphas == (-1.0, 0.5) and curve.losses[0] == curve.losses[1]
    other = gather(EncoderModel(TOY, adapters=AdapterConfig(4)))
    with pytest.raises(ValueError):
        loss_landscape(model, gather(model), other, task.dev)


def test_landscape_curve_validation():
    with pytest.raises(ValueError):
        LandscapeCurve((0.0, 1.0), (1.0,))
    with pytest.raises(ValueError):
        LandscapeCurve((1.0, 0.0), (1.0, 2.0))


# -- sweeps -------------------------------------------------------------------------


def test_quartiles_hand_values():
    assert quartiles([1, 2, 3, 4, 5]) == (1.0, 2.0, 3.0, 4.0, 5.0)
    assert iqr([5, 1, 4, 2, 3]) == 2.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
def test_quartiles_ordered(values):
    q = quartiles(values)
    assert list(q) == sorted(q)
    assert q[0] == min(values) and q[-1] == max(values)


def test_default_lrs():
    assert DEFAULT_LRS == (2e-5, 4e-5, 6e-5, 8e-5, 1e-4)


def test_sweep_result_requires_full_grid():
    with pytest.raises(ValueError, match="unfilled"):
        SweepResult("finetune", (1e-4,), (0, 1), (SweepCell(1e-4, 0, 0.5),))


def test_single_cell_sweep_matches_direct_training(task):
    cfg = TrainConfig(epochs=2, batch_size=8)
    policy = TuningPolicy.from_name("finetune")
    result = lr_sweep(task, EncoderModel(TOY, seed=0), policy, lrs=[1e-3], seeds=[5], cfg=cfg)
    model = EncoderModel(TOY, seed=0)
    record, _ = train(model, task, policy, TrainConfig(epochs=2, batch_size=8, peak_lr=1e-3, seed=5))
    assert result.values() == [record.test_metric]
    assert result.cell(1e-3, 5).metric == record.test_metric
    assert not result.failures


def test_diverged_run_recorded_as_failed_zero(task):
    policy = TuningPolicy.from_name("finetune")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        result = lr_sweep(task, EncoderModel(TOY, seed=0), policy, lrs=[1e300], seeds=[0],
                          cfg=TrainConfig(epochs=1, batch_size=8))
    (cell,) = result.cells
    assert cell.failed and cell.metric == 0.0
    assert result.pooled_iqr() == 0.0


def test_parallel_sweep_matches_serial(task):
    cfg = TrainConfig(epochs=1, batch_size=16)
    policy = TuningPolicy.from_name("finetune")
    source = EncoderModel(TOY, seed=0)
    serial = lr_sweep(task, source, policy, lrs=[1e-3, 2e-3], seeds=[0], cfg=cfg)
    parallel = lr_sweep(task, source, policy, lrs=[1e-3, 2e-3], seeds=[0], cfg=cfg, workers=2)
    assert serial == parallel


# -- deviation ----------------------------------------------------------------------


def test_module_grouping():
    assert module_of("layer.3.attention.query.weight") == "layer.3.attention"
    assert module_of("layer.0.adapter_ffn.up.bias") == "layer.0.adapter_ffn"
    assert module_of("embeddings.token.weight") == "embeddings"


def test_deviation_zero_for_identical_models():
    model = EncoderModel(TOY, seed=0)
    rep = parameter_deviation(model, model.copy())
    assert rep.total == 0.0 and all(v == (0.0, 0.0) for v in rep.groups.values())


def test_deviation_scalar_arithmetic():
    a = ModelSnapshot(np.array([3.0]), {"w": (0, 1)}, {"w": ()})
    b = ModelSnapshot(np.array([7.0]), {"w": (0, 1)}, {"w": ()})
    rep = parameter_deviation(a, b)
    assert rep.l2("w") == 4.0 and rep.relative("w") == pytest.approx(4 / 3)


def test_adapter_run_leaves_backbone_groups_at_zero(task):
    model = EncoderModel(TOY, adapters=AdapterConfig(4), seed=0)
    policy = TuningPolicy.from_name("adapter", adapter_size=4)
    train(model, task, policy, TrainConfig(epochs=2, batch_size=8, peak_lr=1e-3))
    rep = parameter_deviation(gather(model, initial=True), model)
    for module in ("embeddings", "layer.0.attention", "layer.1.ffn", "mlm_head"):
        assert rep.l2(module) == 0.0
    assert rep.l2("layer.0.adapter_attn") > 0.0 and rep.l2("classifier") > 0.0


def test_deviation_layout_mismatch():
    with pytest.raises(ValueError):
        parameter_deviation(EncoderModel(TOY), EncoderModel(TOY, adapters=AdapterConfig(4)))
