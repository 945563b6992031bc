import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from candlearn.losses import InvalidCandidateSetError
from candlearn.sampling import (
    AnnotatedExample,
    CandidateSet,
    all_candidate_sets,
    annotate_dataset,
    as_singleton_examples,
    candidate_probability,
    check_simplex,
    examples_arrays,
    posterior_mixture,
    sample_candidate_set,
)


def test_candidate_set_construction():
    s = CandidateSet((0, 2, 5))
    assert s.n == 3 and len(s) == 3
    assert 2 in s and 1 not in s
    assert list(s) == [0, 2, 5]
    assert CandidateSet.from_iterable([5, 0, 2]) == s
    with pytest.raises(InvalidCandidateSetError):
        CandidateSet(())
    with pytest.raises(InvalidCandidateSetError):
        CandidateSet((2, 1))
    with pytest.raises(InvalidCandidateSetError):
        CandidateSet((0, 0))
    with pytest.raises(InvalidCandidateSetError):
        CandidateSet((-1, 2))


def test_check_simplex():
    np.testing.assert_array_equal(check_simplex([0.5, 0.5]), [0.5, 0.5])
    with pytest.raises(ValueError):
        check_simplex([0.5, 0.6])
    with pytest.raises(ValueError):
        check_simplex([1.2, -0.2])
    with pytest.raises(ValueError):
        check_simplex([1.0])
    with pytest.raises(ValueError):
        check_simplex([np.nan, 1.0])


def test_set_probabilities_sum_to_one():
    rng = np.random.default_rng(0)
    for k in (3, 5, 6):
        p = rng.dirichlet(np.ones(k))
        for n in range(1, k):
            sets = list(all_candidate_sets(k, n))
            assert len(sets) == math.comb(k, n)
            total = sum(candidate_probability(p, s) for s in sets)
            assert total == pytest.approx(1.0, abs=1e-12)


def test_all_candidate_sets_order_and_bounds():
    assert [s.labels for s in all_candidate_sets(4, 2)] == [
        (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
    ]
    with pytest.raises(InvalidCandidateSetError):
        list(all_candidate_sets(4, 4))
    with pytest.raises(InvalidCandidateSetError):
        list(all_candidate_sets(4, 0))


def test_sampler_matches_law_within_monte_carlo_error():
    # frequency of each set within 5 standard errors of its probability
    k, n, draws = 5, 2, 100_000
    rng = np.random.default_rng(42)
    p = np.asarray([0.05, 0.1, 0.15, 0.3, 0.4])
    counts: dict[tuple, int] = {}
    for _ in range(draws):
        s = sample_candidate_set(p, n, rng)
        counts[s.labels] = counts.get(s.labels, 0) + 1
    for s in all_candidate_sets(k, n):
        prob = candidate_probability(p, s)
        se = math.sqrt(prob * (1.0 - prob) / draws)
        assert abs(counts.get(s.labels, 0) / draws - prob) < 5 * se


def test_sampler_deterministic_given_state():
    p = [0.25, 0.25, 0.25, 0.25]
    a = [sample_candidate_set(p, 2, np.random.default_rng(9)).labels for _ in range(5)]
    b = [sample_candidate_set(p, 2, np.random.default_rng(9)).labels for _ in range(5)]
    assert a == b


def test_sampler_rejects_bad_sizes():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidCandidateSetError):
        sample_candidate_set([0.5, 0.5], 2, rng)
    with pytest.raises(InvalidCandidateSetError):
        sample_candidate_set([0.5, 0.5], 0, rng)


@settings(max_examples=30, deadline=None)
@given(
    k=st.integers(3, 8),
    n=st.integers(1, 7),
    seed=st.integers(0, 2**31),
)
def test_anchor_always_in_set(k, n, seed):
    if n >= k:
        n = k - 1
    rng = np.random.default_rng(seed)
    p = np.zeros(k)
    p[1] = 1.0  # anchor is forced, so 1 must be in every draw
    for _ in range(10):
        assert 1 in sample_candidate_set(p, n, rng)


def test_posterior_mixture_identities():
    rng = np.random.default_rng(5)
    for k in (3, 4, 6):
        p = rng.dirichlet(np.ones(k))
        beta, q = posterior_mixture(p, 1)
        assert beta == pytest.approx(1.0)
        np.testing.assert_allclose(q, p, atol=1e-15)
        for n in range(1, k):
            beta, q = posterior_mixture(p, n)
            assert q.sum() == pytest.approx(1.0, abs=1e-12)
            # enumerate: P(single uniform pick = alpha)
            for alpha in range(k):
                mass = sum(
                    candidate_probability(p, s) / n
                    for s in all_candidate_sets(k, n)
                    if alpha in s
                )
                assert mass == pytest.approx(q[alpha], abs=1e-12)


def test_mixture_sinks_toward_uniform():
    p = np.asarray([0.7, 0.1, 0.1, 0.05, 0.05])
    spread = []
    for n in range(1, 5):
        _, q = posterior_mixture(p, n)
        spread.append(q.max() - q.min())
    assert spread == sorted(spread, reverse=True)
    assert spread[-1] > 0.0  # K-1 sets still carry a little signal


def test_annotate_dataset_shapes_and_reproducibility():
    features = np.random.default_rng(1).normal(size=(20, 3))

    def annotator(x):
        z = np.asarray([x @ np.ones(3), -x @ np.ones(3), x[0], x[1]])
        e = np.exp(z - z.max())
        return e / e.sum()

    a = annotate_dataset(features, annotator, 2, np.random.default_rng(3))
    b = annotate_dataset(features, annotator, 2, np.random.default_rng(3))
    assert len(a) == 20
    for ea, eb in zip(a, b):
        assert ea.candidates == eb.candidates
        assert ea.true_label == eb.true_label
        np.testing.assert_array_equal(ea.x, eb.x)
        assert ea.candidates.n == 2
        assert 0 <= ea.true_label < 4


def test_annotate_dataset_stochastic_sizes():
    features = np.zeros((60, 2))
    annotator = lambda x: np.full(5, 0.2)
    examples = annotate_dataset(features, annotator, 1, np.random.default_rng(0), stochastic_n=True)
    sizes = {e.candidates.n for e in examples}
    assert sizes == {1, 2, 3, 4}


def test_annotate_dataset_validates():
    with pytest.raises(ValueError):
        annotate_dataset(np.zeros(3), lambda x: [0.5, 0.5], 1, np.random.default_rng(0))
    with pytest.raises(InvalidCandidateSetError):
        annotate_dataset(np.zeros((2, 2)), lambda x: np.full(4, 0.25), 4, np.random.default_rng(0))


def test_singletons_and_arrays():
    features = np.arange(6.0).reshape(3, 2)
    examples = as_singleton_examples(features, [2, 0, 1])
    assert all(e.candidates.n == 1 for e in examples)
    assert [e.true_label for e in examples] == [2, 0, 1]
    x, member = examples_arrays(examples, 3)
    np.testing.assert_array_equal(x, features)
    np.testing.assert_array_equal(
        member, [[False, False, True], [True, False, False], [False, True, False]]
    )
    with pytest.raises(ValueError):
        examples_arrays([], 3)


def test_examples_arrays_rejects_out_of_range_labels():
    bad = [AnnotatedExample(x=np.zeros(2), candidates=CandidateSet((3,)))]
    with pytest.raises(InvalidCandidateSetError):
        examples_arrays(bad, 3)
