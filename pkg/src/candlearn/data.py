"""Synthetic blob datasets, IDX tensor ingestion, and JSONL persistence.

Two line-delimited formats, both with a JSON header line followed by one
JSON record per example:

* labeled:    header {"kind":"labeled","version":1,"k":..,"dims":..,"count":..,"meta":{..}}
              record {"x":[..],"y":int}
* annotated:  header {"kind":"annotated","version":1,"k":..,"n":int|null,
               "seed":int|null,"generator":str,"count":..,"meta":{..}}
              record {"x":[..],"y_set":[..],"y_true":int|null}

Floats are serialized with their shortest round-trip representation, so
save -> load -> save reproduces files byte for byte.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .sampling import AnnotatedExample, CandidateSet

__all__ = [
    "SyntheticSpec",
    "LabeledDataset",
    "AnnotatedDataset",
    "IdxTensor",
    "IdxFormatError",
    "IDX_UBYTE",
    "IDX_FLOAT32",
    "circle_means",
    "scattered_means",
    "generate_synthetic",
    "gaussian_posterior",
    "oracle_annotator",
    "onehot_annotator",
    "softmax_annotator",
    "parse_idx",
    "write_idx",
    "load_idx_file",
    "load_idx_pair",
    "restrict_classes",
    "save_labeled",
    "load_labeled",
    "save_annotated",
    "load_annotated",
    "save_synthetic_spec",
    "load_synthetic_spec",
    "load_dataset",
]


# --------------------------------------------------------------------------
# synthetic blobs


@dataclass(frozen=True)
class SyntheticSpec:
    """Isotropic Gaussian blob dataset: one cluster per class."""

    k: int
    dims: int
    per_class: int
    class_means: tuple[tuple[float, ...], ...]
    class_stddev: float
    seed: int

    def __post_init__(self):
        if self.k < 2 or self.dims < 1 or self.per_class < 1:
            raise ValueError("need k >= 2, dims >= 1, per_class >= 1")
        if not (self.class_stddev > 0.0):
            raise ValueError("class stddev must be positive")
        means = tuple(tuple(float(v) for v in row) for row in self.class_means)
        if len(means) != self.k or any(len(row) != self.dims for row in means):
            raise ValueError(f"class means must have shape ({self.k}, {self.dims})")
        if len(set(means)) != self.k:
            raise ValueError("class means must be pairwise distinct")
        object.__setattr__(self, "class_means", means)

    @property
    def means_array(self) -> np.ndarray:
        return np.asarray(self.class_means, dtype=float)


def circle_means(k: int, radius: float = 3.0) -> np.ndarray:
    """k class means spaced evenly on a 2-D circle."""
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    angles = 2.0 * np.pi * np.arange(k) / k
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


def scattered_means(k: int, dims: int, scale: float, seed: int) -> np.ndarray:
    """k Gaussian-scattered means for arbitrary dimension."""
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((k, dims))


def generate_synthetic(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Class-major blob sample, fully determined by ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    means = spec.means_array
    blocks = []
    for c in range(spec.k):
        noise = rng.standard_normal((spec.per_class, spec.dims))
        blocks.append(means[c] + spec.class_stddev * noise)
    features = np.concatenate(blocks, axis=0)
    labels = np.repeat(np.arange(spec.k), spec.per_class)
    return features, labels


def gaussian_posterior(x, means, stddev: float, temperature: float = 1.0) -> np.ndarray:
    """Class posterior of an equal-prior isotropic Gaussian mixture at ``x``."""
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")
    means = np.asarray(means, dtype=float)
    diffs = means - np.asarray(x, dtype=float)
    logits = -(diffs**2).sum(axis=1) / (2.0 * stddev**2 * temperature)
    logits -= logits.max()
    weights = np.exp(logits)
    return weights / weights.sum()


def oracle_annotator(means, stddev: float, temperature: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Annotator that reports the generative posterior of a blob dataset."""
    means = np.asarray(means, dtype=float)

    def annotate(x: np.ndarray) -> np.ndarray:
        return gaussian_posterior(x, means, stddev, temperature)

    return annotate


def onehot_annotator(features, labels, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """Annotator that returns the stored label as a degenerate posterior.

    Matching is by feature-row identity within the given dataset; use it to
    annotate the same features it was built from.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    index = {row.tobytes(): int(y) for row, y in zip(features, labels)}

    def annotate(x: np.ndarray) -> np.ndarray:
        key = np.asarray(x, dtype=float).tobytes()
        if key not in index:
            raise ValueError("feature row not part of the annotator's dataset")
        p = np.zeros(k)
        p[index[key]] = 1.0
        return p

    return annotate


def softmax_annotator(scorer, temperature: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Annotator that softmaxes a trained scorer's outputs."""
    if temperature <= 0.0:
        raise ValueError("temperature must be positive")

    def annotate(x: np.ndarray) -> np.ndarray:
        logits = np.asarray(scorer(np.asarray(x, dtype=float)), dtype=float) / temperature
        logits -= logits.max()
        weights = np.exp(logits)
        return weights / weights.sum()

    return annotate


# --------------------------------------------------------------------------
# IDX binary tensors
#
# offset 0: two zero magic bytes
# offset 2: dtype code (0x08 unsigned byte, 0x0D big-endian float32)
# offset 3: rank
# offset 4: rank big-endian uint32 extents, then the row-major payload.

IDX_UBYTE = 0x08
IDX_FLOAT32 = 0x0D
_ELEMENT_SIZES = {IDX_UBYTE: 1, IDX_FLOAT32: 4}


class IdxFormatError(ValueError):
    """Structured IDX parse failure, with the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class IdxTensor:
    dtype_code: int
    dims: tuple[int, ...]
    values: np.ndarray


def parse_idx(buf: bytes) -> IdxTensor:
    """Parse one IDX tensor from bytes; total over arbitrary input."""
    if len(buf) < 4:
        raise IdxFormatError(f"truncated header: need 4 bytes, got {len(buf)}", offset=len(buf))
    if buf[0] != 0 or buf[1] != 0:
        offset = 0 if buf[0] != 0 else 1
        raise IdxFormatError(f"bad magic byte 0x{buf[offset]:02x}", offset=offset)
    code = buf[2]
    if code not in _ELEMENT_SIZES:
        raise IdxFormatError(f"unsupported dtype code 0x{code:02x}", offset=2)
    rank = buf[3]
    header_len = 4 + 4 * rank
    if len(buf) < header_len:
        raise IdxFormatError(
            f"truncated dimension table: need {header_len} bytes, got {len(buf)}",
            offset=len(buf),
        )
    dims = struct.unpack(f">{rank}I", buf[4:header_len]) if rank else ()
    count = math.prod(dims)
    expected = count * _ELEMENT_SIZES[code]
    payload = len(buf) - header_len
    if payload < expected:
        raise IdxFormatError(
            f"truncated payload: expected {expected} bytes, got {payload}",
            offset=len(buf),
        )
    if payload > expected:
        raise IdxFormatError("trailing bytes after payload", offset=header_len + expected)
    raw = buf[header_len:]
    if code == IDX_UBYTE:
        values = np.frombuffer(raw, dtype=np.uint8).reshape(dims)
    else:
        values = np.frombuffer(raw, dtype=">f4").astype(np.float32).reshape(dims)
    return IdxTensor(dtype_code=code, dims=tuple(int(d) for d in dims), values=values)


def write_idx(tensor: IdxTensor) -> bytes:
    """Serialize an :class:`IdxTensor` back to bytes (inverse of parse_idx)."""
    if tensor.dtype_code not in _ELEMENT_SIZES:
        raise ValueError(f"unsupported dtype code 0x{tensor.dtype_code:02x}")
    rank = len(tensor.dims)
    if rank > 255:
        raise ValueError("rank does not fit the format's single byte")
    header = bytes([0, 0, tensor.dtype_code, rank]) + struct.pack(f">{rank}I", *tensor.dims)
    if tensor.dtype_code == IDX_UBYTE:
        payload = np.asarray(tensor.values, dtype=np.uint8).reshape(tensor.dims).tobytes()
    else:
        payload = np.asarray(tensor.values, dtype=">f4").reshape(tensor.dims).tobytes()
    return header + payload


def load_idx_file(path) -> IdxTensor:
    return parse_idx(Path(path).read_bytes())


def load_idx_pair(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Load an images/labels IDX pair as (features in [0, 1], labels).

    Image tensors are flattened to one row per example; unsigned-byte
    pixels are scaled by 1/255.
    """
    images = load_idx_file(images_path)
    labels = load_idx_file(labels_path)
    if len(images.dims) < 2:
        raise ValueError(f"image tensor must have rank >= 2, got {images.dims}")
    if len(labels.dims) != 1:
        raise ValueError(f"label tensor must have rank 1, got {labels.dims}")
    if images.dims[0] != labels.dims[0]:
        raise ValueError(
            f"image/label count mismatch: {images.dims[0]} vs {labels.dims[0]}"
        )
    count = images.dims[0]
    features = np.asarray(images.values, dtype=float).reshape(count, -1)
    if images.dtype_code == IDX_UBYTE:
        features = features / 255.0
    return features, np.asarray(labels.values, dtype=np.int64)


def restrict_classes(features, labels, keep: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Keep only the listed classes, relabeling them densely to 0..len(keep)-1.

    Example order is preserved; the new label of class keep[i] is i.
    """
    keep = [int(c) for c in keep]
    if len(set(keep)) != len(keep) or not keep:
        raise ValueError("keep must be a nonempty list of distinct classes")
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    relabel = {c: i for i, c in enumerate(keep)}
    mask = np.isin(labels, keep)
    new_labels = np.asarray([relabel[int(y)] for y in labels[mask]], dtype=np.int64)
    return features[mask], new_labels


# --------------------------------------------------------------------------
# JSONL persistence


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    k: int
    meta: dict = field(default_factory=dict)


@dataclass
class AnnotatedDataset:
    examples: list[AnnotatedExample]
    k: int
    n_cand: int | None
    seed: int | None = None
    generator: str = ""
    meta: dict = field(default_factory=dict)


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def save_labeled(path, dataset: LabeledDataset) -> None:
    features = np.asarray(dataset.features, dtype=float)
    labels = np.asarray(dataset.labels)
    if features.ndim != 2 or labels.shape != (features.shape[0],):
        raise ValueError("labeled dataset needs (n, d) features and (n,) labels")
    header = {
        "kind": "labeled",
        "version": 1,
        "k": int(dataset.k),
        "dims": int(features.shape[1]),
        "count": int(features.shape[0]),
        "meta": dataset.meta,
    }
    with open(path, "w", newline="\n") as fh:
        fh.write(_dump(header) + "\n")
        for x, y in zip(features, labels):
            fh.write(_dump({"x": x.tolist(), "y": int(y)}) + "\n")


def load_labeled(path) -> LabeledDataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "labeled":
            raise ValueError(f"{path} is not a labeled dataset file")
        k = int(header["k"])
        xs, ys = [], []
        for line in fh:
            record = json.loads(line)
            xs.append(record["x"])
            y = int(record["y"])
            if not 0 <= y < k:
                raise ValueError(f"label {y} out of range for {k} classes")
            ys.append(y)
    if len(xs) != header["count"]:
        raise ValueError(f"expected {header['count']} records, found {len(xs)}")
    features = np.asarray(xs, dtype=float)
    return LabeledDataset(features=features, labels=np.asarray(ys, dtype=np.int64), k=k, meta=header.get("meta", {}))


def save_annotated(path, dataset: AnnotatedDataset) -> None:
    # refuse to write a file the loader would reject
    for example in dataset.examples:
        labels = example.candidates.labels
        if len(labels) >= dataset.k or max(labels) >= dataset.k:
            raise ValueError(f"candidate set {labels} invalid for {dataset.k} classes")
        if dataset.n_cand is not None and len(labels) != dataset.n_cand:
            raise ValueError(
                f"candidate set size {len(labels)} disagrees with header n={dataset.n_cand}"
            )
        if example.true_label is not None and not 0 <= example.true_label < dataset.k:
            raise ValueError(f"true label {example.true_label} out of range")
    header = {
        "kind": "annotated",
        "version": 1,
        "k": int(dataset.k),
        "n": None if dataset.n_cand is None else int(dataset.n_cand),
        "seed": None if dataset.seed is None else int(dataset.seed),
        "generator": dataset.generator,
        "count": len(dataset.examples),
        "meta": dataset.meta,
    }
    with open(path, "w", newline="\n") as fh:
        fh.write(_dump(header) + "\n")
        for example in dataset.examples:
            record = {
                "x": np.asarray(example.x, dtype=float).tolist(),
                "y_set": list(example.candidates.labels),
                "y_true": example.true_label,
            }
            fh.write(_dump(record) + "\n")


def load_annotated(path) -> AnnotatedDataset:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "annotated":
            raise ValueError(f"{path} is not an annotated dataset file")
        k = int(header["k"])
        n_cand = header.get("n")
        examples = []
        for line in fh:
            record = json.loads(line)
            labels = [int(v) for v in record["y_set"]]
            if not labels or len(labels) >= k or min(labels) < 0 or max(labels) >= k:
                raise ValueError(f"candidate set {labels} invalid for {k} classes")
            if n_cand is not None and len(labels) != n_cand:
                raise ValueError(
                    f"candidate set size {len(labels)} disagrees with header n={n_cand}"
                )
            true = record.get("y_true")
            if true is not None:
                true = int(true)
                if not 0 <= true < k:
                    raise ValueError(f"true label {true} out of range for {k} classes")
            examples.append(
                AnnotatedExample(
                    x=np.asarray(record["x"], dtype=float),
                    candidates=CandidateSet(tuple(labels)),
                    true_label=true,
                )
            )
    if len(examples) != header["count"]:
        raise ValueError(f"expected {header['count']} records, found {len(examples)}")
    return AnnotatedDataset(
        examples=examples,
        k=k,
        n_cand=None if n_cand is None else int(n_cand),
        seed=header.get("seed"),
        generator=header.get("generator", ""),
        meta=header.get("meta", {}),
    )


def save_synthetic_spec(path, spec: SyntheticSpec) -> None:
    payload = {
        "kind": "synthetic_spec",
        "version": 1,
        "k": spec.k,
        "dims": spec.dims,
        "per_class": spec.per_class,
        "class_means": [list(row) for row in spec.class_means],
        "class_stddev": spec.class_stddev,
        "seed": spec.seed,
    }
    with open(path, "w", newline="\n") as fh:
        fh.write(_dump(payload) + "\n")


def load_synthetic_spec(path) -> SyntheticSpec:
    with open(path) as fh:
        payload = json.loads(fh.readline())
    if payload.get("kind") != "synthetic_spec":
        raise ValueError(f"{path} is not a synthetic spec file")
    return SyntheticSpec(
        k=int(payload["k"]),
        dims=int(payload["dims"]),
        per_class=int(payload["per_class"]),
        class_means=tuple(tuple(row) for row in payload["class_means"]),
        class_stddev=float(payload["class_stddev"]),
        seed=int(payload["seed"]),
    )


def load_dataset(source) -> LabeledDataset | AnnotatedDataset:
    """Load any recognized dataset source.

    Accepts a :class:`SyntheticSpec` (generated on the fly), or a path to a
    labeled JSONL file, an annotated JSONL file, or a synthetic spec file.
    """
    if isinstance(source, SyntheticSpec):
        features, labels = generate_synthetic(source)
        meta = {
            "generator": "synthetic",
            "class_means": [list(row) for row in source.class_means],
            "class_stddev": source.class_stddev,
            "seed": source.seed,
        }
        return LabeledDataset(features=features, labels=labels, k=source.k, meta=meta)
    path = Path(source)
    with open(path) as fh:
        first = fh.readline()
    try:
        kind = json.loads(first).get("kind")
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not a recognized dataset file") from exc
    if kind == "labeled":
        return load_labeled(path)
    if kind == "annotated":
        return load_annotated(path)
    if kind == "synthetic_spec":
        return load_dataset(load_synthetic_spec(path))
    raise ValueError(f"unrecognized dataset kind {kind!r} in {path}")
