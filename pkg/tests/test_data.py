import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from candlearn.data import (
    IDX_FLOAT32,
    IDX_UBYTE,
    AnnotatedDataset,
    IdxFormatError,
    IdxTensor,
    LabeledDataset,
    SyntheticSpec,
    circle_means,
    gaussian_posterior,
    generate_synthetic,
    load_annotated,
    load_dataset,
    load_idx_pair,
    load_labeled,
    load_synthetic_spec,
    onehot_annotator,
    oracle_annotator,
    parse_idx,
    restrict_classes,
    save_annotated,
    save_labeled,
    save_synthetic_spec,
    scattered_means,
    softmax_annotator,
    write_idx,
)
from candlearn.sampling import annotate_dataset


def demo_spec(seed=3):
    return SyntheticSpec(
        k=3,
        dims=2,
        per_class=4,
        class_means=((0.0, 0.0), (3.0, 0.0), (0.0, 3.0)),
        class_stddev=1.0,
        seed=seed,
    )


# synthetic generation


def test_circle_means_geometry():
    means = circle_means(4, radius=2.0)
    assert means.shape == (4, 2)
    np.testing.assert_allclose(np.linalg.norm(means, axis=1), 2.0, atol=1e-12)
    # distinct directions
    assert len({tuple(np.round(m, 9)) for m in means}) == 4


def test_scattered_means_shape_and_determinism():
    a = scattered_means(5, 3, 2.0, seed=1)
    b = scattered_means(5, 3, 2.0, seed=1)
    np.testing.assert_array_equal(a, b)
    assert a.shape == (5, 3)


def test_generate_synthetic_layout():
    spec = demo_spec()
    features, labels = generate_synthetic(spec)
    assert features.shape == (12, 2)
    np.testing.assert_array_equal(labels, np.repeat([0, 1, 2], 4))
    again, _ = generate_synthetic(spec)
    np.testing.assert_array_equal(features, again)


def test_generate_synthetic_tiny_stddev_recovers_means():
    spec = SyntheticSpec(
        k=2, dims=2, per_class=3,
        class_means=((1.0, 2.0), (-1.0, 0.5)),
        class_stddev=1e-300, seed=0,
    )
    features, labels = generate_synthetic(spec)
    np.testing.assert_array_equal(features[labels == 0], np.tile([1.0, 2.0], (3, 1)))


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(k=2, dims=2, per_class=3, class_means=((0.0, 0.0), (0.0, 0.0)),
                      class_stddev=1.0, seed=0)
    with pytest.raises(ValueError):
        SyntheticSpec(k=2, dims=2, per_class=0, class_means=((0.0, 0.0), (1.0, 1.0)),
                      class_stddev=1.0, seed=0)
    with pytest.raises(ValueError):
        SyntheticSpec(k=2, dims=3, per_class=1, class_means=((0.0, 0.0), (1.0, 1.0)),
                      class_stddev=1.0, seed=0)


def test_gaussian_posterior_properties():
    means = circle_means(3)
    q = gaussian_posterior(np.asarray(means[0]), means, stddev=1.0)
    assert q.sum() == pytest.approx(1.0, abs=1e-12)
    assert q.argmax() == 0
    hot = gaussian_posterior(np.asarray(means[0]), means, stddev=1.0, temperature=0.01)
    assert hot[0] > q[0]
    flat = gaussian_posterior(np.asarray(means[0]), means, stddev=1.0, temperature=100.0)
    assert flat.max() - flat.min() < q.max() - q.min()


def test_annotators():
    means = circle_means(3)
    oracle = oracle_annotator(means, 1.0)
    q = oracle(means[1])
    assert q.argmax() == 1

    features = np.asarray([[0.0, 0.0], [1.0, 1.0]])
    onehot = onehot_annotator(features, np.asarray([2, 0]), 3)
    np.testing.assert_array_equal(onehot(features[0]), [0.0, 0.0, 1.0])
    np.testing.assert_array_equal(onehot(features[1]), [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        onehot(np.asarray([9.0, 9.0]))

    const = softmax_annotator(lambda x: np.asarray([2.0, 0.0, 0.0]), temperature=1.0)
    q = const(np.zeros(2))
    assert q.argmax() == 0 and q.sum() == pytest.approx(1.0)


# idx parsing


def golden_idx():
    values = np.arange(6, dtype=np.uint8).reshape(2, 3)
    return write_idx(IdxTensor(IDX_UBYTE, (2, 3), values)), values


def test_idx_roundtrip_ubyte():
    blob, values = golden_idx()
    assert blob[:4] == bytes([0, 0, IDX_UBYTE, 2])
    tensor = parse_idx(blob)
    assert tensor.dims == (2, 3)
    np.testing.assert_array_equal(tensor.values, values)


def test_idx_roundtrip_float32():
    values = np.asarray([[1.5, -2.0]], dtype=">f4")
    blob = write_idx(IdxTensor(IDX_FLOAT32, (1, 2), values))
    tensor = parse_idx(blob)
    assert tensor.dtype_code == IDX_FLOAT32
    np.testing.assert_array_equal(tensor.values.astype(float), [[1.5, -2.0]])


def test_idx_error_offsets():
    blob, _ = golden_idx()
    with pytest.raises(IdxFormatError) as info:
        parse_idx(b"")
    assert info.value.offset == 0
    with pytest.raises(IdxFormatError) as info:
        parse_idx(b"\x01" + blob[1:])
    assert info.value.offset == 0
    with pytest.raises(IdxFormatError) as info:
        parse_idx(blob[:1] + b"\x01" + blob[2:])
    assert info.value.offset == 1
    with pytest.raises(IdxFormatError) as info:
        parse_idx(blob[:2] + b"\x42" + blob[3:])  # unknown dtype code
    assert info.value.offset == 2
    with pytest.raises(IdxFormatError) as info:
        parse_idx(blob[:7])  # truncated dim table
    assert info.value.offset == 7
    with pytest.raises(IdxFormatError) as info:
        parse_idx(blob[:-1])  # truncated payload
    assert info.value.offset == len(blob) - 1
    with pytest.raises(IdxFormatError) as info:
        parse_idx(blob + b"\x00")  # trailing garbage
    assert info.value.offset == len(blob)
    assert "offset" in str(info.value)


def test_idx_huge_dims_do_not_allocate():
    # header priced at 4 GiB must fail by size check, quickly
    blob = bytes([0, 0, IDX_UBYTE, 2]) + struct.pack(">II", 65536, 65536)
    with pytest.raises(IdxFormatError):
        parse_idx(blob)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=64))
def test_idx_fuzz_total(blob):
    try:
        parse_idx(blob)
    except IdxFormatError:
        pass


def test_load_idx_pair(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (5, 2, 2), dtype=np.uint8)
    labels = np.asarray([0, 1, 2, 1, 0], dtype=np.uint8)
    (tmp_path / "im.idx").write_bytes(write_idx(IdxTensor(IDX_UBYTE, images.shape, images)))
    (tmp_path / "lb.idx").write_bytes(write_idx(IdxTensor(IDX_UBYTE, labels.shape, labels)))
    features, got = load_idx_pair(tmp_path / "im.idx", tmp_path / "lb.idx")
    assert features.shape == (5, 4)
    assert features.max() <= 1.0 and features.min() >= 0.0
    np.testing.assert_array_equal(got, labels)
    (tmp_path / "short.idx").write_bytes(write_idx(IdxTensor(IDX_UBYTE, (2,), labels[:2])))
    with pytest.raises(ValueError, match="count"):
        load_idx_pair(tmp_path / "im.idx", tmp_path / "short.idx")


def test_restrict_classes():
    features = np.arange(10.0).reshape(5, 2)
    labels = np.asarray([3, 1, 4, 1, 3])
    sub_f, sub_l = restrict_classes(features, labels, [1, 3])
    np.testing.assert_array_equal(sub_l, [1, 0, 0, 1])  # 3 -> 1, 1 -> 0
    np.testing.assert_array_equal(sub_f, features[[0, 1, 3, 4]])
    with pytest.raises(ValueError):
        restrict_classes(features, labels, [1, 1])


# jsonl persistence


def test_labeled_roundtrip_bit_exact(tmp_path):
    spec = demo_spec()
    dataset = load_dataset(spec)
    path = tmp_path / "d.jsonl"
    save_labeled(path, dataset)
    loaded = load_labeled(path)
    np.testing.assert_array_equal(loaded.features, dataset.features)
    np.testing.assert_array_equal(loaded.labels, dataset.labels)
    assert loaded.k == dataset.k
    assert loaded.meta["generator"] == "synthetic"
    again = tmp_path / "d2.jsonl"
    save_labeled(again, loaded)
    assert path.read_bytes() == again.read_bytes()


def test_annotated_roundtrip_bit_exact(tmp_path):
    spec = demo_spec()
    dataset = load_dataset(spec)
    means = np.asarray(dataset.meta["class_means"])
    annot = oracle_annotator(means, dataset.meta["class_stddev"])
    examples = annotate_dataset(dataset.features, annot, 2, np.random.default_rng(5))
    bundle = AnnotatedDataset(examples=examples, k=3, n_cand=2, seed=5, generator="oracle")
    path = tmp_path / "a.jsonl"
    save_annotated(path, bundle)
    loaded = load_annotated(path)
    assert loaded.k == 3 and loaded.n_cand == 2 and loaded.generator == "oracle"
    assert len(loaded.examples) == len(examples)
    for a, b in zip(loaded.examples, examples):
        np.testing.assert_array_equal(a.x, b.x)
        assert a.candidates == b.candidates
        assert a.true_label == b.true_label
    again = tmp_path / "a2.jsonl"
    save_annotated(again, loaded)
    assert path.read_bytes() == again.read_bytes()


def test_annotated_header_disagreement(tmp_path):
    spec = demo_spec()
    dataset = load_dataset(spec)
    means = np.asarray(dataset.meta["class_means"])
    annot = oracle_annotator(means, 1.0)
    examples = annotate_dataset(dataset.features, annot, 2, np.random.default_rng(5))
    bundle = AnnotatedDataset(examples=examples, k=3, n_cand=1, seed=5, generator="oracle")
    path = tmp_path / "bad.jsonl"
    with pytest.raises(ValueError):
        save_annotated(path, bundle)


def test_spec_roundtrip(tmp_path):
    spec = demo_spec(seed=11)
    path = tmp_path / "spec.jsonl"
    save_synthetic_spec(path, spec)
    assert load_synthetic_spec(path) == spec
    # a spec file loads as the dataset it describes
    loaded = load_dataset(path)
    assert isinstance(loaded, LabeledDataset)
    direct = load_dataset(spec)
    np.testing.assert_array_equal(loaded.features, direct.features)


def test_load_dataset_dispatch(tmp_path):
    spec = demo_spec()
    dataset = load_dataset(spec)
    assert isinstance(dataset, LabeledDataset)

    labeled_path = tmp_path / "l.jsonl"
    save_labeled(labeled_path, dataset)
    assert isinstance(load_dataset(labeled_path), LabeledDataset)

    means = np.asarray(dataset.meta["class_means"])
    examples = annotate_dataset(dataset.features, oracle_annotator(means, 1.0), 1,
                                np.random.default_rng(0))
    annotated_path = tmp_path / "a.jsonl"
    save_annotated(annotated_path, AnnotatedDataset(examples=examples, k=3, n_cand=1))
    assert isinstance(load_dataset(annotated_path), AnnotatedDataset)

    junk = tmp_path / "x.jsonl"
    junk.write_text('{"kind":"mystery"}\n')
    with pytest.raises(ValueError):
        load_dataset(junk)
