"""Task generator, augmentation, split, and CSV round-trip tests."""

import numpy as np
import pytest

from soupkit.data import (
    AUGMENT_PARAMS,
    CLASS_SEPARATION,
    OOD_SHIFT_FACTOR,
    AugmentLevel,
    LabeledDataset,
    TaskKind,
    TaskSpec,
    augment,
    gen_task,
    load_csv,
    save_csv,
    split,
)
from soupkit.nn import Batch


def _spec(**kw):
    base = dict(kind=TaskKind.ROUGH, seed=0, dims=4, class_count=3, n_samples=300)
    base.update(kw)
    return TaskSpec(**base)


# ---------------------------------------------------------------------------
# TaskSpec

def test_task_spec_validation():
    with pytest.raises(ValueError):
        _spec(dims=0)
    with pytest.raises(ValueError):
        _spec(class_count=1)
    with pytest.raises(ValueError):
        _spec(imbalance_ratio=0.5)
    with pytest.raises(ValueError):
        _spec(label_noise_rate=1.0)
    with pytest.raises(ValueError):
        _spec(shift_magnitude=-0.1)


def test_smooth_spec_pins_complications_off():
    spec = TaskSpec(kind=TaskKind.SMOOTH, seed=0, dims=4, class_count=3, n_samples=300,
                    imbalance_ratio=9.0, label_noise_rate=0.3, shift_magnitude=2.0)
    assert spec.imbalance_ratio == 1.0
    assert spec.label_noise_rate == 0.0
    assert spec.shift_magnitude == 0.0


def test_task_spec_dict_roundtrip():
    spec = _spec(imbalance_ratio=4.0, label_noise_rate=0.1, cluster_heterogeneity=1.5,
                 shift_magnitude=1.2, source_shift=2.0)
    again = TaskSpec.from_dict(spec.to_dict())
    assert again == spec
    assert spec.task_id == "rough-0"


# ---------------------------------------------------------------------------
# gen_task

def test_gen_task_deterministic():
    a = gen_task(_spec(label_noise_rate=0.1, imbalance_ratio=3.0, shift_magnitude=1.0))
    b = gen_task(_spec(label_noise_rate=0.1, imbalance_ratio=3.0, shift_magnitude=1.0))
    for role, ds in a.splits().items():
        other = b.splits()[role]
        assert np.array_equal(ds.features, other.features), role
        assert np.array_equal(ds.labels, other.labels), role


def test_gen_task_seed_changes_data():
    a = gen_task(_spec(seed=0))
    b = gen_task(_spec(seed=1))
    assert not np.array_equal(a.train.features, b.train.features)


def test_gen_task_split_sizes_and_roles():
    bundle = gen_task(_spec(n_samples=300), ratios=(0.85, 0.05, 0.10))
    assert bundle.val.n == 15
    assert bundle.test.n == 30
    assert bundle.train.n == 300 - 15 - 30
    assert bundle.ood.n == bundle.test.n
    assert bundle.source.n == 300
    for role, ds in bundle.splits().items():
        assert ds.role == role
        assert ds.task_id == "rough-0"
        assert ds.dims == 4


def test_gen_task_imbalance_direction():
    bundle = gen_task(_spec(n_samples=3000, imbalance_ratio=6.0))
    counts = np.bincount(bundle.train.labels, minlength=3)
    assert counts[0] > counts[1] > counts[2]
    assert counts[0] / counts[2] == pytest.approx(6.0, rel=0.15)
    # source stays balanced regardless
    src_counts = np.bincount(bundle.source.labels, minlength=3)
    assert src_counts.max() - src_counts.min() <= 1


def _pair_labels_by_row(a, b):
    """Align two datasets containing the same feature rows in different order."""
    key_a = np.argsort([row.tobytes() for row in a.features])
    key_b = np.argsort([row.tobytes() for row in b.features])
    assert np.array_equal(a.features[key_a], b.features[key_b])
    return a.labels[key_a], b.labels[key_b]


def test_gen_task_label_noise_only_on_train_and_val():
    clean = gen_task(_spec(seed=3, n_samples=3000))
    noisy = gen_task(_spec(seed=3, n_samples=3000, label_noise_rate=0.2))
    # the flip consumes extra rng draws, so row order shifts; rows themselves match
    la, lb = _pair_labels_by_row(clean.train, noisy.train)
    assert 0.1 < (la != lb).mean() < 0.3
    la, lb = _pair_labels_by_row(clean.val, noisy.val)
    assert (la != lb).any()
    # held-out splits come from separate streams and stay untouched
    assert np.array_equal(clean.test.features, noisy.test.features)
    assert np.array_equal(clean.test.labels, noisy.test.labels)
    assert np.array_equal(clean.ood.features, noisy.ood.features)
    assert np.array_equal(clean.ood.labels, noisy.ood.labels)


def test_gen_task_ood_is_further_shifted():
    spec = _spec(n_samples=4000, shift_magnitude=1.5)
    bundle = gen_task(spec)
    train_mu = bundle.train.features.mean(axis=0)
    test_delta = np.linalg.norm(bundle.test.features.mean(axis=0) - train_mu)
    ood_delta = np.linalg.norm(bundle.ood.features.mean(axis=0) - train_mu)
    assert test_delta == pytest.approx(1.5, abs=0.3)
    assert ood_delta == pytest.approx(OOD_SHIFT_FACTOR * 1.5, abs=0.4)


def test_gen_task_smooth_test_matches_train_distribution():
    bundle = gen_task(TaskSpec(kind=TaskKind.SMOOTH, seed=1, dims=4, class_count=3, n_samples=4000))
    mu_train = bundle.train.features.mean(axis=0)
    mu_test = bundle.test.features.mean(axis=0)
    assert np.linalg.norm(mu_train - mu_test) < 0.3


def test_gen_task_separation_scales_with_dims():
    # means are drawn at CLASS_SEPARATION / sqrt(d): norms concentrate near CLASS_SEPARATION
    spec = TaskSpec(kind=TaskKind.SMOOTH, seed=5, dims=400, class_count=3, n_samples=100)
    bundle = gen_task(spec)
    del bundle
    rng = np.random.default_rng(np.random.SeedSequence([0xDA7A, 5]).spawn(6)[0])
    means = CLASS_SEPARATION * rng.normal(size=(3, 400)) / np.sqrt(400)
    assert np.linalg.norm(means, axis=1) == pytest.approx(CLASS_SEPARATION, rel=0.1)


def test_gen_task_rejects_degenerate():
    with pytest.raises(ValueError):
        gen_task(_spec(n_samples=2))
    with pytest.raises(ValueError):
        gen_task(_spec(), ratios=(0.5, 0.5, 0.0))
    with pytest.raises(ValueError):
        gen_task(_spec(), ratios=(0.5, 0.3, 0.3))


# ---------------------------------------------------------------------------
# split()

def test_split_partition_is_disjoint_and_exhaustive():
    bundle = gen_task(_spec())
    tr, va, te = split(bundle.source, (0.6, 0.2, 0.2), seed=0)
    assert tr.n + va.n + te.n == bundle.source.n
    stacked = np.vstack([tr.features, va.features, te.features])
    # same multiset of rows as the input
    assert sorted(map(tuple, stacked)) == sorted(map(tuple, bundle.source.features))
    assert (tr.role, va.role, te.role) == ("train", "val", "test")


def test_split_deterministic_in_seed():
    bundle = gen_task(_spec())
    a = split(bundle.source, (0.6, 0.2, 0.2), seed=4)[0]
    b = split(bundle.source, (0.6, 0.2, 0.2), seed=4)[0]
    c = split(bundle.source, (0.6, 0.2, 0.2), seed=5)[0]
    assert np.array_equal(a.features, b.features)
    assert not np.array_equal(a.features, c.features)


# ---------------------------------------------------------------------------
# augment

def _batch(n=200, d=6, seed=0):
    rng = np.random.default_rng(seed)
    return Batch(rng.normal(size=(n, d)), rng.integers(0, 3, size=n))


def test_augment_minimal_is_identity():
    batch = _batch()
    out = augment(batch, AugmentLevel.MINIMAL, np.random.default_rng(0))
    assert out is batch  # no copy, bitwise-identical by construction


def test_augment_medium_jitters_features_only():
    batch = _batch()
    out = augment(batch, AugmentLevel.MEDIUM, np.random.default_rng(1))
    assert out is not batch
    assert np.array_equal(out.labels, batch.labels)
    delta = out.features - batch.features
    sigma = AUGMENT_PARAMS[AugmentLevel.MEDIUM][0]
    assert abs(delta.std() - sigma) < 0.01
    assert abs(delta.mean()) < 0.01


def test_augment_heavy_zeroes_features():
    batch = _batch(n=2000)
    out = augment(batch, AugmentLevel.HEAVY, np.random.default_rng(2))
    zero_rate = (out.features == 0.0).mean()
    assert zero_rate == pytest.approx(AUGMENT_PARAMS[AugmentLevel.HEAVY][1], abs=0.02)


def test_augment_deterministic_given_rng_state():
    batch = _batch()
    a = augment(batch, "heavy", np.random.default_rng(7))
    b = augment(batch, "heavy", np.random.default_rng(7))
    assert np.array_equal(a.features, b.features)


def test_augment_overrides():
    batch = _batch()
    out = augment(batch, AugmentLevel.MINIMAL, np.random.default_rng(3), sigma=0.5)
    assert not np.array_equal(out.features, batch.features)
    # explicit zeros turn a heavy level into identity
    out2 = augment(batch, AugmentLevel.HEAVY, np.random.default_rng(3), sigma=0.0, dropout_p=0.0)
    assert out2 is batch


# ---------------------------------------------------------------------------
# CSV round trip

def test_csv_roundtrip_bitwise(tmp_path):
    bundle = gen_task(_spec(label_noise_rate=0.1))
    path = tmp_path / "train.csv"
    save_csv(bundle.train, path)
    back = load_csv(path, role="train", task_id=bundle.train.task_id,
                    class_count=bundle.train.class_count)
    assert np.array_equal(back.features, bundle.train.features)
    assert np.array_equal(back.labels, bundle.train.labels)
    assert back.class_count == 3


def test_load_csv_headerless_with_index_column(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("1.5,2.5,0\n-0.25,0.75,1\n")
    ds = load_csv(path, label_column=2)
    assert ds.n == 2
    assert ds.class_count == 2
    np.testing.assert_array_equal(ds.labels, [0, 1])
    np.testing.assert_array_equal(ds.features, [[1.5, 2.5], [-0.25, 0.75]])
    assert ds.task_id == "plain"


def test_load_csv_label_column_by_name_needs_header(tmp_path):
    path = tmp_path / "x.csv"
    path.write_text("1.0,0\n2.0,1\n")
    with pytest.raises(ValueError, match="header"):
        load_csv(path, label_column="label")


def test_load_csv_diagnostics(tmp_path):
    ragged = tmp_path / "ragged.csv"
    ragged.write_text("f0,label\n1.0,0\n2.0\n")
    with pytest.raises(ValueError, match="row 2"):
        load_csv(ragged)

    bad_cell = tmp_path / "bad.csv"
    bad_cell.write_text("f0,label\n1.0,0\nxyz,1\n")
    with pytest.raises(ValueError, match="non-numeric"):
        load_csv(bad_cell)

    frac_label = tmp_path / "frac.csv"
    frac_label.write_text("f0,label\n1.0,0.5\n")
    with pytest.raises(ValueError, match="non-integer label"):
        load_csv(frac_label)

    missing = tmp_path / "missing.csv"
    missing.write_text("f0,f1\n1.0,2.0\n")
    with pytest.raises(ValueError, match="no column named"):
        load_csv(missing, label_column="label")

    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        load_csv(empty)


def test_labeled_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 1]), class_count=2, role="nope", task_id="t")
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 5]), class_count=2, role="train", task_id="t")
    with pytest.raises(ValueError):
        LabeledDataset(np.array([[np.nan, 0.0]]), np.array([0]), class_count=2, role="train", task_id="t")
