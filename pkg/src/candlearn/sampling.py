"""Candidate-set generation: exact sampling, its posterior mixture, and
dataset annotation.

The generation model ties the probability of observing a candidate set Y
of size N to the class posterior p: P(Y | x) = sum_{y in Y} p_y / C(K-1, N-1).
Equivalently, picking a single label uniformly out of a drawn Y follows the
mixture beta * p + (1 - beta)/K with beta = (K-N)/(N*(K-1)), which is what
makes larger sets progressively less informative about the true class.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .losses import InvalidCandidateSetError, candidate_labels

__all__ = [
    "CandidateSet",
    "AnnotatedExample",
    "check_simplex",
    "candidate_probability",
    "all_candidate_sets",
    "sample_candidate_set",
    "posterior_mixture",
    "annotate_dataset",
    "as_singleton_examples",
    "examples_arrays",
]


@dataclass(frozen=True)
class CandidateSet:
    """An immutable, sorted set of candidate labels."""

    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.labels) == 0:
            raise InvalidCandidateSetError("candidate set may not be empty")
        for v in self.labels:
            if not isinstance(v, (int, np.integer)):
                raise InvalidCandidateSetError(f"label {v!r} is not an integer")
            if v < 0:
                raise InvalidCandidateSetError(f"label {v} is negative")
        if any(b <= a for a, b in zip(self.labels, self.labels[1:])):
            raise InvalidCandidateSetError(
                f"labels must be strictly increasing, got {self.labels}"
            )
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))

    @classmethod
    def from_iterable(cls, labels: Iterable[int]) -> "CandidateSet":
        return cls(tuple(sorted(int(v) for v in labels)))

    @property
    def n(self) -> int:
        return len(self.labels)

    def __iter__(self):
        return iter(self.labels)

    def __len__(self):
        return len(self.labels)

    def __contains__(self, item):
        return item in self.labels


@dataclass(frozen=True)
class AnnotatedExample:
    """One training example: features, a candidate set, and (optionally)
    an independently drawn true label for evaluation.

    The true label is sampled from the annotator's class posterior on its
    own, so membership in the candidate set is likely but never asserted.
    """

    x: np.ndarray
    candidates: CandidateSet
    true_label: int | None = None


def check_simplex(p, tol: float = 1e-12) -> np.ndarray:
    """Validate a class-probability vector; returns it as a float array."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1 or arr.shape[0] < 2:
        raise ValueError(f"class distribution must be a vector over >= 2 classes, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("class distribution must be finite")
    if arr.min() < 0.0:
        raise ValueError(f"class probabilities must be nonnegative, got min {arr.min()}")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"class probabilities must sum to 1, got {arr.sum()!r}")
    return arr


def candidate_probability(p, y_set) -> float:
    """Probability of drawing candidate set ``y_set`` under posterior ``p``.

    P(Y) = sum_{y in Y} p_y / C(K-1, N-1).
    """
    p = check_simplex(p)
    k = p.shape[0]
    labels = candidate_labels(y_set, k)
    return float(p[labels].sum() / math.comb(k - 1, labels.size - 1))


def all_candidate_sets(k: int, n_cand: int) -> Iterator[CandidateSet]:
    """All C(k, n_cand) candidate sets in lexicographic order."""
    if not 1 <= n_cand <= k - 1:
        raise InvalidCandidateSetError(f"set size {n_cand} invalid for {k} classes")
    for combo in itertools.combinations(range(k), n_cand):
        yield CandidateSet(combo)


def _categorical(p: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    acc = 0.0
    for j, pj in enumerate(p):
        acc += pj
        if u < acc:
            return j
    return p.shape[0] - 1


def sample_candidate_set(p, n_cand: int, rng: np.random.Generator) -> CandidateSet:
    """Draw one candidate set of size ``n_cand`` from the generation model.

    Two-stage draw: an anchor label from p, then a uniform (n_cand - 1)-subset
    of the remaining classes.  Each set S receives total mass
    sum_{y in S} p_y / C(K-1, n_cand-1): the anchor must land in S (mass p_y)
    and the rest of the draw must then hit exactly S minus the anchor, one of
    C(K-1, n_cand-1) equally likely subsets.  This matches the target law and
    costs O(K) per draw.
    """
    p = check_simplex(p)
    k = p.shape[0]
    if not 1 <= n_cand <= k - 1:
        raise InvalidCandidateSetError(f"set size {n_cand} invalid for {k} classes")
    anchor = _categorical(p, rng)
    pool = [y for y in range(k) if y != anchor]
    # Partial Fisher-Yates: the first n_cand - 1 slots end up a uniform subset.
    for i in range(n_cand - 1):
        j = int(rng.integers(i, k - 1))
        pool[i], pool[j] = pool[j], pool[i]
    labels = pool[: n_cand - 1]
    labels.append(anchor)
    return CandidateSet(tuple(sorted(labels)))


def posterior_mixture(p, n_cand: int) -> tuple[float, np.ndarray]:
    """Law of one label drawn uniformly from a sampled candidate set.

    Returns (beta, q) with beta = (K - N)/(N * (K - 1)) and
    q = beta * p + (1 - beta)/K.  At N = 1 this is p itself; as N grows the
    mixture sinks toward uniform, which is the privacy/informativeness
    trade-off of candidate supervision.
    """
    p = check_simplex(p)
    k = p.shape[0]
    if not 1 <= n_cand <= k - 1:
        raise InvalidCandidateSetError(f"set size {n_cand} invalid for {k} classes")
    beta = (k - n_cand) / (n_cand * (k - 1))
    q = beta * p + (1.0 - beta) / k
    return float(beta), q


def annotate_dataset(
    features,
    annotator: Callable[[np.ndarray], np.ndarray],
    n_cand: int,
    rng: np.random.Generator,
    stochastic_n: bool = False,
) -> list[AnnotatedExample]:
    """Annotate every feature row with a candidate set (and a true label).

    ``annotator`` maps a feature vector to a class posterior.  Per example,
    the true label is drawn first and the candidate set second, both from
    the same posterior and the same stream, so results are reproducible
    from the generator state.  With ``stochastic_n`` the set size is drawn
    uniformly from {1, ..., K-1} per example and ``n_cand`` is ignored.
    Output order matches input order.
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2:
        raise ValueError(f"expected a 2-D feature array, got shape {features.shape}")
    out: list[AnnotatedExample] = []
    k = None
    for x in features:
        p = check_simplex(annotator(x))
        if k is None:
            k = p.shape[0]
            if not stochastic_n and not 1 <= n_cand <= k - 1:
                raise InvalidCandidateSetError(f"set size {n_cand} invalid for {k} classes")
        elif p.shape[0] != k:
            raise ValueError("annotator returned distributions of varying length")
        true = _categorical(p, rng)
        size = int(rng.integers(1, k)) if stochastic_n else n_cand
        y_set = sample_candidate_set(p, size, rng)
        out.append(AnnotatedExample(x=x.copy(), candidates=y_set, true_label=true))
    return out


def as_singleton_examples(features, labels) -> list[AnnotatedExample]:
    """Wrap an ordinarily labeled dataset as size-1 candidate annotations."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if features.ndim != 2 or labels.ndim != 1 or features.shape[0] != labels.shape[0]:
        raise ValueError("features must be (n, d) and labels (n,)")
    return [
        AnnotatedExample(x=x.copy(), candidates=CandidateSet((int(y),)), true_label=int(y))
        for x, y in zip(features, labels)
    ]


def examples_arrays(examples: Sequence[AnnotatedExample], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack examples into a feature matrix and a boolean membership mask."""
    if len(examples) == 0:
        raise ValueError("no examples")
    features = np.stack([np.asarray(e.x, dtype=float) for e in examples])
    member = np.zeros((len(examples), k), dtype=bool)
    for i, e in enumerate(examples):
        labels = candidate_labels(e.candidates, k)
        member[i, labels] = True
    return features, member
