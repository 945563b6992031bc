"""Risk estimation from candidate-annotated data.

The workhorse identity: for a loss family whose candidate-set loss is the
bare sum of per-class losses over the set (reflection constant zero), the
classification risk equals (K-1)/(K-N) times the expected candidate-set
loss.  The empirical estimator therefore rescales the mean set loss by
(K-1)/(K-N); it is unbiased and may legitimately be negative, so no
clipping is applied anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .losses import (
    LossScheme,
    Strategy,
    candidate_loss,
    candidate_losses_batch,
    ordinary_losses,
)
from .sampling import (
    AnnotatedExample,
    all_candidate_sets,
    candidate_probability,
    check_simplex,
    examples_arrays,
)

__all__ = [
    "RiskReport",
    "ErrorEstimate",
    "rescale_factor",
    "require_simplified",
    "empirical_risk",
    "true_risk_oracle",
    "zero_one_evaluate",
    "classification_error",
]

ENUMERATION_CAP = 12

Scorer = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class RiskReport:
    """Evaluation summary over a labeled test set."""

    empirical_risk: float
    zero_one_risk: float
    accuracy: float
    n: int

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("report needs at least one example")
        if abs(self.accuracy - (1.0 - self.zero_one_risk)) > 1e-12:
            raise ValueError("accuracy and zero-one risk disagree")

    def to_record(self) -> dict:
        return {
            "empirical_risk": self.empirical_risk,
            "zero_one_risk": self.zero_one_risk,
            "accuracy": self.accuracy,
            "n": self.n,
        }


@dataclass(frozen=True)
class ErrorEstimate:
    """Excess test risk of a fitted model over a reference minimizer."""

    err: float
    risk_fitted: float
    risk_reference: float

    def to_record(self) -> dict:
        return {
            "err": self.err,
            "risk_fitted": self.risk_fitted,
            "risk_reference": self.risk_reference,
        }


def rescale_factor(k: int, n_cand: int) -> float:
    """(K-1)/(K-N): 1 for singleton sets, K-1 for sets missing one class."""
    if not 1 <= n_cand <= k - 1:
        raise ValueError(f"set size {n_cand} invalid for {k} classes")
    return (k - 1) / (k - n_cand)


def require_simplified(scheme: LossScheme) -> None:
    """Reject schemes whose candidate loss is not the bare per-class sum.

    The unbiased estimator needs scale 1, shift 0, and reflection constant
    zero; shift the surrogate (e.g. use the sigmoid or ramp forms here)
    and drop additive constants to qualify.
    """
    if scheme.surrogate.a != 0.0:
        raise ValueError(
            "empirical risk needs a surrogate with reflection constant zero; "
            f"{scheme.surrogate.kind.value} has a = {scheme.surrogate.a}"
        )
    if scheme.strategy is Strategy.GENERAL_ADDITIVE and not (
        scheme.scale == 1.0 and scheme.shift == 0.0
    ):
        raise ValueError("empirical risk needs additive constants scale=1, shift=0")


def _risk_terms(
    scheme: LossScheme,
    scorer: Scorer,
    examples: Sequence[AnnotatedExample],
    allow_mixed_n: bool,
) -> np.ndarray:
    features, member = examples_arrays(examples, scheme.k)
    sizes = member.sum(axis=1)
    if not allow_mixed_n and sizes.min() != sizes.max():
        raise ValueError(
            "dataset mixes candidate-set sizes; pass allow_mixed_n=True to "
            "rescale per example"
        )
    scores = np.asarray(scorer(features), dtype=float)
    if scores.shape != (len(examples), scheme.k):
        raise ValueError(
            f"scorer returned shape {scores.shape}, expected {(len(examples), scheme.k)}"
        )
    losses = candidate_losses_batch(scheme, scores, member)
    return (scheme.k - 1) / (scheme.k - sizes) * losses


def empirical_risk(
    scheme: LossScheme,
    scorer: Scorer,
    examples: Sequence[AnnotatedExample],
    allow_mixed_n: bool = False,
) -> float:
    """Unbiased classification-risk estimate from candidate annotations.

    (K-1)/(n*(K-N)) * sum_i set_loss(g(x_i), Y_i); with mixed set sizes the
    rescale factor is applied per example, which equals grouping by size and
    averaging the per-group estimates weighted by group share.
    """
    require_simplified(scheme)
    return float(np.mean(_risk_terms(scheme, scorer, examples, allow_mixed_n)))


def true_risk_oracle(scheme: LossScheme, g, p, n_cand: int) -> tuple[float, float]:
    """Check the risk-rewriting identity at a single input by enumeration.

    Returns (lhs, rhs) where lhs = sum_y p_y L(g, y) is the conditional
    classification risk and rhs rewrites it through the expected candidate
    loss over all C(K, N) sets:

        rhs = (K-1)/(scale*(K-N)) * E[set_loss] + C,
        C   = -((N-1)/(K-N)) * sum_y L(g, y) - shift*(K-1)/(scale*(K-N)).

    The per-class loss sum in C is evaluated literally even though it is a
    known constant for the closed-form families.
    """
    k = scheme.k
    if k > ENUMERATION_CAP:
        raise ValueError(f"enumeration oracle capped at {ENUMERATION_CAP} classes, got {k}")
    p = check_simplex(p)
    if p.shape[0] != k:
        raise ValueError("distribution length must match the scheme's class count")
    per_class = ordinary_losses(scheme, g)
    lhs = float(p @ per_class)
    expected = 0.0
    for y_set in all_candidate_sets(k, n_cand):
        expected += candidate_probability(p, y_set) * candidate_loss(scheme, g, y_set)
    scale, shift = scheme.additive_constants(n_cand)
    constant = -(n_cand - 1) / (k - n_cand) * per_class.sum() - shift * (k - 1) / (
        scale * (k - n_cand)
    )
    rhs = (k - 1) / (scale * (k - n_cand)) * expected + constant
    return lhs, float(rhs)


def zero_one_evaluate(
    scorer: Scorer,
    examples: Sequence[AnnotatedExample],
    scheme: LossScheme | None = None,
) -> RiskReport:
    """Accuracy and zero-one risk of argmax classification on true labels.

    Ties argmax to the smallest index.  When ``scheme`` is given the report
    also carries the rescaled candidate risk over the same examples;
    otherwise the zero-one risk is repeated in that slot.
    """
    if len(examples) == 0:
        raise ValueError("no examples")
    labels = []
    for e in examples:
        if e.true_label is None:
            raise ValueError("zero-one evaluation needs true labels on every example")
        labels.append(e.true_label)
    features = np.stack([np.asarray(e.x, dtype=float) for e in examples])
    scores = np.asarray(scorer(features), dtype=float)
    predictions = np.argmax(scores, axis=1)
    accuracy = float(np.mean(predictions == np.asarray(labels)))
    zero_one = 1.0 - accuracy
    if scheme is not None:
        emp = empirical_risk(scheme, scorer, examples)
    else:
        emp = zero_one
    return RiskReport(empirical_risk=emp, zero_one_risk=zero_one, accuracy=accuracy, n=len(examples))


def classification_error(
    scheme: LossScheme,
    fitted: Scorer,
    reference: Scorer,
    test_examples: Sequence[AnnotatedExample],
) -> ErrorEstimate:
    """Excess rescaled test risk of ``fitted`` over ``reference``.

    ``reference`` is meant to be a model trained to minimize the risk of the
    test annotations themselves; the difference can be negative in finite
    samples and is reported as computed.
    """
    risk_fitted = empirical_risk(scheme, fitted, test_examples)
    risk_reference = empirical_risk(scheme, reference, test_examples)
    return ErrorEstimate(
        err=risk_fitted - risk_reference,
        risk_fitted=risk_fitted,
        risk_reference=risk_reference,
    )
