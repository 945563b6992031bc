"""Scalar surrogate losses and the multiclass loss family built on them.

Every scalar loss here is non-increasing and satisfies the reflection
identity l(z) + l(-z) = a for a fixed constant ``a``.  (The step loss
counts a tied score as an error on both sides, so its reflection identity
and everything derived from it hold only away from z = 0.)  On top of a scalar
loss, a per-class loss L(g, y) over a score vector g is built one of two
ways:

* one-vs-all:  L(g, y) = l(g_y) + (1/(K-1)) * sum_{y' != y} l(-g_{y'})
* pairwise:    L(g, y) = sum_{y' != y} l(g_y - g_{y'})

Supervision by an N-element candidate set Y (a set promised to contain
the true class) is scored either by a closed-form set loss or by the
additive form scale * sum_{y in Y} L(g, y) + shift.  The same quantity
can be rewritten as a weighted sum of losses over the complement of Y
plus a different constant (the dual form).  The reflection constant
``a`` fixes the bookkeeping constants used throughout:

* row sum:  sum_y L(g, y) is independent of g (a*K one-vs-all,
  a*C(K,2) pairwise),
* reflection pair:  L(g, y) plus the complement-class loss at the same
  y is constant (2a one-vs-all, a*(K-1) pairwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

__all__ = [
    "SurrogateKind",
    "SurrogateLoss",
    "Strategy",
    "LossScheme",
    "ZERO_ONE",
    "SIGMOID_SHIFTED",
    "RAMP_SHIFTED",
    "SURROGATES",
    "NonDifferentiableLossError",
    "InvalidCandidateSetError",
    "eval_surrogate",
    "surrogate_grad",
    "ordinary_loss",
    "ordinary_losses",
    "complementary_loss",
    "complementary_losses",
    "general_complementary_loss",
    "candidate_loss",
    "ova_candidate_loss",
    "pc_candidate_loss",
    "dual_candidate_loss",
    "candidate_loss_grad",
    "candidate_losses_batch",
    "candidate_grads_batch",
    "candidate_labels",
    "member_mask",
    "ova_scheme",
    "pc_scheme",
    "additive_scheme",
    "scheme_for",
]


class NonDifferentiableLossError(ValueError):
    """A gradient was requested for a loss with no usable derivative."""


class InvalidCandidateSetError(ValueError):
    """Candidate set is empty, the full label set, or out of range."""


class SurrogateKind(str, Enum):
    ZERO_ONE = "zero_one"
    SIGMOID_SHIFTED = "sigmoid_shifted"
    RAMP_SHIFTED = "ramp_shifted"


class Strategy(str, Enum):
    """How per-class losses are assembled from the scalar surrogate."""

    OVA = "ova"
    PC = "pc"
    GENERAL_ADDITIVE = "general_additive"


@dataclass(frozen=True)
class SurrogateLoss:
    """A scalar margin loss with its bookkeeping constants.

    ``a`` is the reflection constant (l(z) + l(-z) = a), ``lo``/``hi``
    bound the loss values, and ``lipschitz`` is the modulus the bound
    calculators use (an upper bound on the true modulus, not necessarily
    tight).
    """

    kind: SurrogateKind
    a: float
    lipschitz: float
    lo: float
    hi: float
    differentiable: bool


ZERO_ONE = SurrogateLoss(
    kind=SurrogateKind.ZERO_ONE, a=1.0, lipschitz=math.inf, lo=0.0, hi=1.0,
    differentiable=False,
)
SIGMOID_SHIFTED = SurrogateLoss(
    kind=SurrogateKind.SIGMOID_SHIFTED, a=0.0, lipschitz=1.0, lo=-0.5, hi=0.5,
    differentiable=True,
)
RAMP_SHIFTED = SurrogateLoss(
    kind=SurrogateKind.RAMP_SHIFTED, a=0.0, lipschitz=0.5, lo=-0.5, hi=0.5,
    differentiable=True,
)

SURROGATES = {s.kind.value: s for s in (ZERO_ONE, SIGMOID_SHIFTED, RAMP_SHIFTED)}


def _as_finite_array(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("loss argument must be finite")
    return arr, arr.ndim == 0


def _sigmoid_shifted(z: np.ndarray) -> np.ndarray:
    # Evaluate 1/(1 + e^z) - 1/2 without overflowing for large |z|.
    out = np.empty_like(z)
    pos = z >= 0.0
    t = np.exp(-z[pos])
    out[pos] = t / (1.0 + t) - 0.5
    e = np.exp(z[~pos])
    out[~pos] = 1.0 / (1.0 + e) - 0.5
    return out


def eval_surrogate(loss: SurrogateLoss, z):
    """Evaluate the scalar loss at ``z`` (scalar or array, elementwise)."""
    arr, scalar = _as_finite_array(z)
    arr = np.atleast_1d(arr)
    if loss.kind is SurrogateKind.SIGMOID_SHIFTED:
        out = _sigmoid_shifted(arr)
    elif loss.kind is SurrogateKind.RAMP_SHIFTED:
        out = np.clip(-0.5 * arr, -0.5, 0.5) + 0.0
    elif loss.kind is SurrogateKind.ZERO_ONE:
        # Ties at z = 0 count as a miss: l(0) = 1.
        out = np.where(arr <= 0.0, 1.0, 0.0)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown surrogate kind {loss.kind!r}")
    return float(out[0]) if scalar else out


def surrogate_grad(loss: SurrogateLoss, z):
    """Derivative of the scalar loss at ``z`` (scalar or array).

    The ramp loss uses the saturated-side convention at its kinks
    (|z| = 1 maps to slope 0).
    """
    if not loss.differentiable:
        raise NonDifferentiableLossError(
            f"{loss.kind.value} has no usable gradient; train with a smooth surrogate"
        )
    arr, scalar = _as_finite_array(z)
    arr = np.atleast_1d(arr)
    if loss.kind is SurrogateKind.SIGMOID_SHIFTED:
        s = _sigmoid_shifted(arr) + 0.5
        out = -s * (1.0 - s)
    else:
        out = np.where(np.abs(arr) < 1.0, -0.5, 0.0)
    return float(out[0]) if scalar else out


def candidate_labels(y_set: Iterable[int], k: int) -> np.ndarray:
    """Validate a candidate set against ``k`` classes; return sorted labels."""
    raw = list(y_set)
    for v in raw:
        if not isinstance(v, (int, np.integer)):
            raise InvalidCandidateSetError(f"candidate label {v!r} is not an integer")
    labels = sorted(int(v) for v in raw)
    n = len(labels)
    if n == 0 or n >= k:
        raise InvalidCandidateSetError(
            f"candidate set must be a nonempty proper subset of {k} classes, got size {n}"
        )
    if any(b == a for a, b in zip(labels, labels[1:])):
        raise InvalidCandidateSetError(f"duplicate labels in candidate set {labels}")
    if labels[0] < 0 or labels[-1] >= k:
        raise InvalidCandidateSetError(f"labels {labels} out of range for {k} classes")
    return np.asarray(labels, dtype=np.int64)


def member_mask(labels: np.ndarray, k: int) -> np.ndarray:
    mask = np.zeros(k, dtype=bool)
    mask[labels] = True
    return mask


@dataclass(frozen=True)
class LossScheme:
    """A multiclass loss family over ``k`` classes.

    ``strategy`` selects how candidate sets are scored: the two closed
    forms, or the general additive form scale * sum_{y in Y} L(g, y) +
    shift over a ``base`` per-class loss.  For the closed forms ``base``
    equals ``strategy`` and ``scale``/``shift`` are ignored.
    """

    strategy: Strategy
    surrogate: SurrogateLoss
    k: int
    scale: float = 1.0
    shift: float = 0.0
    base: Strategy | None = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least two classes")
        if self.strategy is Strategy.GENERAL_ADDITIVE:
            if self.base not in (Strategy.OVA, Strategy.PC):
                raise ValueError("general additive scheme needs base 'ova' or 'pc'")
            if not (self.scale > 0.0):
                raise ValueError("additive scale must be positive")
        else:
            if self.base is None:
                object.__setattr__(self, "base", self.strategy)
            elif self.base is not self.strategy:
                raise ValueError("closed-form schemes fix base = strategy")

    @property
    def row_sum_const(self) -> float:
        """Value of sum_y L(g, y), which does not depend on g."""
        a = self.surrogate.a
        if self.base is Strategy.OVA:
            return a * self.k
        return a * math.comb(self.k, 2)

    @property
    def pair_sum_const(self) -> float:
        """Value of L(g, y) plus the complement-class loss at the same y."""
        a = self.surrogate.a
        if self.base is Strategy.OVA:
            return 2.0 * a
        return a * (self.k - 1)

    def additive_constants(self, n_cand: int) -> tuple[float, float]:
        """(scale, shift) that express this scheme's candidate loss additively.

        The closed forms differ from the bare sum over the candidate set
        by a set-size-dependent constant; the general form carries its
        own constants.
        """
        a = self.surrogate.a
        if self.strategy is Strategy.OVA:
            return 1.0, -a * n_cand * (n_cand - 1) / (self.k - 1)
        if self.strategy is Strategy.PC:
            return 1.0, -a * math.comb(n_cand, 2)
        return self.scale, self.shift

    def dual_shift(self, n_cand: int) -> float:
        """Constant that converts the complement-set sum back to the candidate loss."""
        scale, shift = self.additive_constants(n_cand)
        return scale * self.row_sum_const + shift - scale * self.pair_sum_const * (self.k - n_cand)


def ova_scheme(k: int, surrogate: SurrogateLoss = SIGMOID_SHIFTED) -> LossScheme:
    return LossScheme(strategy=Strategy.OVA, surrogate=surrogate, k=k)


def pc_scheme(k: int, surrogate: SurrogateLoss = SIGMOID_SHIFTED) -> LossScheme:
    return LossScheme(strategy=Strategy.PC, surrogate=surrogate, k=k)


def additive_scheme(
    k: int,
    base: Strategy | str,
    surrogate: SurrogateLoss = SIGMOID_SHIFTED,
    scale: float = 1.0,
    shift: float = 0.0,
) -> LossScheme:
    return LossScheme(
        strategy=Strategy.GENERAL_ADDITIVE, surrogate=surrogate, k=k,
        scale=scale, shift=shift, base=Strategy(base),
    )


def scheme_for(strategy: Strategy | str, k: int, surrogate: SurrogateLoss = SIGMOID_SHIFTED) -> LossScheme:
    strategy = Strategy(strategy)
    if strategy is Strategy.GENERAL_ADDITIVE:
        raise ValueError("build general additive schemes with additive_scheme()")
    return LossScheme(strategy=strategy, surrogate=surrogate, k=k)


def _scores(g, k: int) -> np.ndarray:
    arr = np.asarray(g, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != k:
        raise ValueError(f"expected a length-{k} score vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("scores must be finite")
    return arr


def _check_label(y: int, k: int) -> int:
    y = int(y)
    if not 0 <= y < k:
        raise IndexError(f"label {y} out of range for {k} classes")
    return y


def _ordinary_vector(base: Strategy, sur: SurrogateLoss, g: np.ndarray) -> np.ndarray:
    k = g.shape[0]
    if base is Strategy.OVA:
        pos = eval_surrogate(sur, g)
        neg = eval_surrogate(sur, -g)
        return pos + (neg.sum() - neg) / (k - 1)
    pair = eval_surrogate(sur, g[:, None] - g[None, :])
    return pair.sum(axis=1) - eval_surrogate(sur, 0.0)


def _complementary_vector(base: Strategy, sur: SurrogateLoss, g: np.ndarray) -> np.ndarray:
    k = g.shape[0]
    if base is Strategy.OVA:
        pos = eval_surrogate(sur, g)
        neg = eval_surrogate(sur, -g)
        return (pos.sum() - pos) / (k - 1) + neg
    pair = eval_surrogate(sur, g[:, None] - g[None, :])
    return pair.sum(axis=0) - eval_surrogate(sur, 0.0)


def ordinary_losses(scheme: LossScheme, g) -> np.ndarray:
    """Per-class losses L(g, y) for every possible true class y."""
    g = _scores(g, scheme.k)
    return _ordinary_vector(scheme.base, scheme.surrogate, g)


def ordinary_loss(scheme: LossScheme, g, y: int) -> float:
    """Loss of score vector ``g`` against a single true label ``y``."""
    g = _scores(g, scheme.k)
    y = _check_label(y, scheme.k)
    return float(_ordinary_vector(scheme.base, scheme.surrogate, g)[y])


def complementary_losses(scheme: LossScheme, g) -> np.ndarray:
    """Per-class losses for every possible ruled-out class."""
    g = _scores(g, scheme.k)
    return _complementary_vector(scheme.base, scheme.surrogate, g)


def complementary_loss(scheme: LossScheme, g, y_bar: int) -> float:
    """Loss against a single complement label (a class known to be wrong)."""
    g = _scores(g, scheme.k)
    y_bar = _check_label(y_bar, scheme.k)
    return float(_complementary_vector(scheme.base, scheme.surrogate, g)[y_bar])


def general_complementary_loss(scheme: LossScheme, g, y_bar: int) -> float:
    """Composite complement-label loss -(K-1) * L(g, y_bar) + sum_y L(g, y).

    Agrees with :func:`complementary_loss` up to a score-independent
    constant whenever the reflection constant is zero, and reduces to the
    opposite-class ordinary loss at K = 2.
    """
    g = _scores(g, scheme.k)
    y_bar = _check_label(y_bar, scheme.k)
    vec = _ordinary_vector(scheme.base, scheme.surrogate, g)
    return float(vec.sum() - (scheme.k - 1) * vec[y_bar])


def ova_candidate_loss(surrogate: SurrogateLoss, g, y_set) -> float:
    """Closed-form one-vs-all candidate-set loss.

    ((K-N)/(K-1)) * sum_{y in Y} l(g_y) + (N/(K-1)) * sum_{y not in Y} l(-g_y)
    """
    g, _ = _as_finite_array(g)
    g = np.atleast_1d(g)
    k = g.shape[0]
    labels = candidate_labels(y_set, k)
    inside = member_mask(labels, k)
    n = labels.size
    pos = eval_surrogate(surrogate, g[inside]).sum()
    neg = eval_surrogate(surrogate, -g[~inside]).sum()
    return float(((k - n) * pos + n * neg) / (k - 1))


def pc_candidate_loss(surrogate: SurrogateLoss, g, y_set) -> float:
    """Closed-form pairwise candidate-set loss sum_{y in Y, y' not in Y} l(g_y - g_{y'})."""
    g, _ = _as_finite_array(g)
    g = np.atleast_1d(g)
    k = g.shape[0]
    labels = candidate_labels(y_set, k)
    inside = member_mask(labels, k)
    return float(eval_surrogate(surrogate, g[inside][:, None] - g[~inside][None, :]).sum())


def candidate_loss(scheme: LossScheme, g, y_set) -> float:
    """Loss of score vector ``g`` against a candidate set ``y_set``."""
    g = _scores(g, scheme.k)
    if scheme.strategy is Strategy.OVA:
        return ova_candidate_loss(scheme.surrogate, g, y_set)
    if scheme.strategy is Strategy.PC:
        return pc_candidate_loss(scheme.surrogate, g, y_set)
    labels = candidate_labels(y_set, scheme.k)
    vec = _ordinary_vector(scheme.base, scheme.surrogate, g)
    return float(scheme.scale * vec[labels].sum() + scheme.shift)


def dual_candidate_loss(scheme: LossScheme, g, complement_set) -> float:
    """Candidate-set loss computed from the complement of the candidate set.

    Equals ``candidate_loss(scheme, g, full_set - complement_set)`` exactly:
    scale * sum over ruled-out classes of the complement-class loss, plus
    the scheme's dual shift.
    """
    g = _scores(g, scheme.k)
    comp = candidate_labels(complement_set, scheme.k)
    n_cand = scheme.k - comp.size
    scale, _ = scheme.additive_constants(n_cand)
    cvec = _complementary_vector(scheme.base, scheme.surrogate, g)
    return float(scale * cvec[comp].sum() + scheme.dual_shift(n_cand))


def candidate_loss_grad(scheme: LossScheme, g, y_set) -> np.ndarray:
    """Gradient of :func:`candidate_loss` with respect to every score."""
    g = _scores(g, scheme.k)
    labels = candidate_labels(y_set, scheme.k)
    member = member_mask(labels, scheme.k).astype(float)
    grads = candidate_grads_batch(scheme, g[None, :], member[None, :] > 0.5)
    return grads[0]


def _check_batch(scheme: LossScheme, scores: np.ndarray, member: np.ndarray):
    scores = np.asarray(scores, dtype=float)
    member = np.asarray(member, dtype=bool)
    if scores.ndim != 2 or scores.shape[1] != scheme.k:
        raise ValueError(f"expected scores of shape (batch, {scheme.k})")
    if member.shape != scores.shape:
        raise ValueError("membership mask must match the score array shape")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    sizes = member.sum(axis=1)
    if scores.shape[0] and (sizes.min() < 1 or sizes.max() > scheme.k - 1):
        raise InvalidCandidateSetError(
            "each candidate row must select a nonempty proper subset of classes"
        )
    return scores, member, sizes.astype(float)


def candidate_losses_batch(scheme: LossScheme, scores: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Candidate-set losses for a batch of score rows and membership masks."""
    scores, member, n_row = _check_batch(scheme, scores, member)
    sur = scheme.surrogate
    k = scheme.k
    m = member.astype(float)
    if scheme.strategy is Strategy.OVA:
        pos = eval_surrogate(sur, scores)
        neg = eval_surrogate(sur, -scores)
        return ((k - n_row) * (m * pos).sum(axis=1) + n_row * ((1.0 - m) * neg).sum(axis=1)) / (k - 1)
    if scheme.strategy is Strategy.PC:
        pair = eval_surrogate(sur, scores[:, :, None] - scores[:, None, :])
        return np.einsum("bi,bj,bij->b", m, 1.0 - m, pair)
    if scheme.base is Strategy.OVA:
        pos = eval_surrogate(sur, scores)
        neg = eval_surrogate(sur, -scores)
        per_class = pos + (neg.sum(axis=1, keepdims=True) - neg) / (k - 1)
    else:
        pair = eval_surrogate(sur, scores[:, :, None] - scores[:, None, :])
        per_class = pair.sum(axis=2) - eval_surrogate(sur, 0.0)
    return scheme.scale * (m * per_class).sum(axis=1) + scheme.shift


def candidate_grads_batch(scheme: LossScheme, scores: np.ndarray, member: np.ndarray) -> np.ndarray:
    """Row-wise gradients of :func:`candidate_losses_batch`."""
    scores, member, n_row = _check_batch(scheme, scores, member)
    sur = scheme.surrogate
    k = scheme.k
    m = member.astype(float)
    if scheme.strategy is Strategy.OVA:
        dpos = surrogate_grad(sur, scores)
        dneg = surrogate_grad(sur, -scores)
        return ((k - n_row)[:, None] * m * dpos - n_row[:, None] * (1.0 - m) * dneg) / (k - 1)
    if scheme.strategy is Strategy.PC:
        t = surrogate_grad(sur, scores[:, :, None] - scores[:, None, :])
        outside = np.einsum("bij,bj->bi", t, 1.0 - m)
        inside = np.einsum("bi,bij->bj", m, t)
        return m * outside - (1.0 - m) * inside
    if scheme.base is Strategy.OVA:
        dpos = surrogate_grad(sur, scores)
        dneg = surrogate_grad(sur, -scores)
        return scheme.scale * (m * dpos - (n_row[:, None] - m) / (k - 1) * dneg)
    t = surrogate_grad(sur, scores[:, :, None] - scores[:, None, :])
    return scheme.scale * (m * t.sum(axis=2) - np.einsum("bi,bij->bj", m, t))
