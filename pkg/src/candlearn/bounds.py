"""Closed-form generalization-bound calculators for candidate-set training.

All formulas are piecewise in the set size N with a branch point at K/2:
below it the candidate view of the loss is tighter, above it the
complement view is, and the two agree exactly at N = K/2.  The deviation
constants differ per branch on purpose (K*N/(K-N) on the low branch, K on
the high branch for the one-vs-all family); the asymmetry comes from the
per-branch sup-norm factor in the concentration step.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .losses import (
    SIGMOID_SHIFTED,
    Strategy,
    SurrogateLoss,
    candidate_loss,
    scheme_for,
)

__all__ = [
    "BoundInputs",
    "BoundReport",
    "LOW_N",
    "HIGH_N",
    "branch",
    "sup_norm",
    "rademacher_bound",
    "deviation_term",
    "error_bound",
    "bound_report",
    "empirical_sup_norm_search",
]

LOW_N = "low_n"
HIGH_N = "high_n"


@dataclass(frozen=True)
class BoundInputs:
    """Everything the error bounds depend on.

    ``lipschitz`` is the scalar-loss modulus and ``rad`` the Rademacher
    complexity of the per-class function space; the defaults are the
    working constants used by the reference experiments.
    """

    k: int
    n_cand: int
    n_train: int
    delta: float = 0.1
    lipschitz: float = 1.0
    rad: float = 0.5

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least two classes")
        if not 1 <= self.n_cand <= self.k - 1:
            raise ValueError(f"set size {self.n_cand} invalid for {self.k} classes")
        if self.n_train < 1:
            raise ValueError("need at least one training example")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("confidence level delta must lie in (0, 1)")
        if self.lipschitz < 0.0 or self.rad < 0.0:
            raise ValueError("lipschitz constant and complexity must be nonnegative")


@dataclass(frozen=True)
class BoundReport:
    ova_sup: float
    pc_sup: float
    ova_rad: float
    pc_rad: float
    ova_err_bound: float
    pc_err_bound: float
    branch: str

    def to_record(self) -> dict:
        return {
            "ova_sup": self.ova_sup,
            "pc_sup": self.pc_sup,
            "ova_rad": self.ova_rad,
            "pc_rad": self.pc_rad,
            "ova_err_bound": self.ova_err_bound,
            "pc_err_bound": self.pc_err_bound,
            "branch": self.branch,
        }


def _strategy(strategy) -> Strategy:
    strategy = Strategy(strategy)
    if strategy is Strategy.GENERAL_ADDITIVE:
        raise ValueError("bounds are defined for the 'ova' and 'pc' families")
    return strategy


def branch(k: int, n_cand: int) -> str:
    """Which side of the K/2 branch point a set size falls on."""
    return LOW_N if n_cand <= k / 2 else HIGH_N


def sup_norm(strategy, k: int, n_cand: int) -> float:
    """Sup norm of the candidate-set loss over all score vectors and sets.

    one-vs-all: K*N/(K-1) for N <= K/2, else K*(K-N)/(K-1); pairwise: N*(K-N).
    """
    strategy = _strategy(strategy)
    if not 1 <= n_cand <= k - 1:
        raise ValueError(f"set size {n_cand} invalid for {k} classes")
    if strategy is Strategy.PC:
        return float(n_cand * (k - n_cand))
    if branch(k, n_cand) == LOW_N:
        return k * n_cand / (k - 1)
    return k * (k - n_cand) / (k - 1)


def rademacher_bound(strategy, k: int, n_cand: int, lipschitz: float, rad: float) -> float:
    """Complexity of the candidate-loss class in terms of the base class.

    one-vs-all: K*(K+N)/(K-1)*L*R for N <= K/2, else K*(2K-N)/(K-1)*L*R;
    pairwise: 2K*(K-1)*L*R.
    """
    strategy = _strategy(strategy)
    if not 1 <= n_cand <= k - 1:
        raise ValueError(f"set size {n_cand} invalid for {k} classes")
    if strategy is Strategy.PC:
        return 2.0 * k * (k - 1) * lipschitz * rad
    if branch(k, n_cand) == LOW_N:
        return k * (k + n_cand) / (k - 1) * lipschitz * rad
    return k * (2 * k - n_cand) / (k - 1) * lipschitz * rad


def deviation_term(strategy, inputs: BoundInputs) -> float:
    """Concentration part of the error bound (the sqrt(log/n) piece)."""
    strategy = _strategy(strategy)
    k, n_cand = inputs.k, inputs.n_cand
    root = math.sqrt(2.0 * math.log(2.0 / inputs.delta) / inputs.n_train)
    if strategy is Strategy.PC:
        return n_cand * (k - 1) * root
    if branch(k, n_cand) == LOW_N:
        return k * n_cand / (k - n_cand) * root
    return float(k) * root


def error_bound(strategy, inputs: BoundInputs) -> float:
    """High-probability excess-risk bound for empirical risk minimization.

    one-vs-all, N <= K/2:  4K(K+N)/(K-N)*L*R + K*N/(K-N)*sqrt(2*ln(2/d)/n)
    one-vs-all, N >  K/2:  4K(2K-N)/(K-N)*L*R + K*sqrt(2*ln(2/d)/n)
    pairwise:              8K(K-1)^2/(K-N)*L*R + N*(K-1)*sqrt(2*ln(2/d)/n)

    Strictly increasing in N for fixed everything else (with L*R > 0): more
    candidates per example means weaker supervision.
    """
    strategy = _strategy(strategy)
    k, n_cand = inputs.k, inputs.n_cand
    lr = inputs.lipschitz * inputs.rad
    if strategy is Strategy.PC:
        complexity = 8.0 * k * (k - 1) ** 2 / (k - n_cand) * lr
    elif branch(k, n_cand) == LOW_N:
        complexity = 4.0 * k * (k + n_cand) / (k - n_cand) * lr
    else:
        complexity = 4.0 * k * (2 * k - n_cand) / (k - n_cand) * lr
    return complexity + deviation_term(strategy, inputs)


def bound_report(inputs: BoundInputs) -> BoundReport:
    """All bound quantities for both families at one (K, N, n) point."""
    return BoundReport(
        ova_sup=sup_norm(Strategy.OVA, inputs.k, inputs.n_cand),
        pc_sup=sup_norm(Strategy.PC, inputs.k, inputs.n_cand),
        ova_rad=rademacher_bound(Strategy.OVA, inputs.k, inputs.n_cand, inputs.lipschitz, inputs.rad),
        pc_rad=rademacher_bound(Strategy.PC, inputs.k, inputs.n_cand, inputs.lipschitz, inputs.rad),
        ova_err_bound=error_bound(Strategy.OVA, inputs),
        pc_err_bound=error_bound(Strategy.PC, inputs),
        branch=branch(inputs.k, inputs.n_cand),
    )


SATURATION = 40.0


def empirical_sup_norm_search(
    strategy,
    k: int,
    n_cand: int,
    surrogate: SurrogateLoss = SIGMOID_SHIFTED,
    trials: int = 50,
    seed: int = 0,
) -> float:
    """Best found value of sup |set_loss(g, Y) - set_loss(g, Y')|.

    Searches all ordered set pairs with saturated score vectors (low on
    Y - Y', high on Y' - Y) plus random scores.  The saturated construction
    attains the analytic sup norm up to surrogate tail mass; no score vector
    can exceed it.
    """
    strategy = _strategy(strategy)
    if surrogate.a != 0.0 or surrogate.lo != -0.5 or surrogate.hi != 0.5:
        raise ValueError("search expects a reflection-zero surrogate with range [-1/2, 1/2]")
    if not 1 <= n_cand <= k - 1:
        raise ValueError(f"set size {n_cand} invalid for {k} classes")
    scheme = scheme_for(strategy, k, surrogate)
    rng = np.random.default_rng(seed)
    random_scores = rng.uniform(-3.0, 3.0, size=(trials, k))
    best = -math.inf
    sets = list(itertools.combinations(range(k), n_cand))
    for left in sets:
        for right in sets:
            saturated = np.zeros(k)
            saturated[list(set(left) - set(right))] = -SATURATION
            saturated[list(set(right) - set(left))] = SATURATION
            gap = candidate_loss(scheme, saturated, left) - candidate_loss(scheme, saturated, right)
            if gap > best:
                best = gap
            for g in random_scores:
                gap = candidate_loss(scheme, g, left) - candidate_loss(scheme, g, right)
                if gap > best:
                    best = gap
    return float(best)
