"""Small dense scorer trained by gradient descent on candidate-set risk.

Forward pass: tanh hidden layers, then a 0.5*tanh squash so every score
lands in [-1/2, 1/2].  The backward pass is hand-written reverse
accumulation; updates are plain SGD or Adam with coupled L2 weight decay
(the decay enters the gradient, not the update rule).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .losses import LossScheme, Strategy, candidate_grads_batch, candidate_losses_batch, scheme_for
from .sampling import AnnotatedExample, examples_arrays

__all__ = [
    "MlpScorer",
    "TrainConfig",
    "TrainingDivergedError",
    "backward",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "config_hash",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_FORMAT = "mlp-scorer"
CHECKPOINT_VERSION = 1


class TrainingDivergedError(RuntimeError):
    """Raised when parameters or the epoch risk stop being finite."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 64
    learning_rate: float = 5e-4
    weight_decay: float = 1e-4
    optimizer: str = "adam"
    seed: int = 0
    strategy: Strategy = Strategy.OVA
    halve_lr_every: int | None = None
    allow_mixed_n: bool = False

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be positive")
        if self.learning_rate < 0.0 or self.weight_decay < 0.0:
            raise ValueError("learning rate and weight decay must be nonnegative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.halve_lr_every is not None and self.halve_lr_every < 1:
            raise ValueError("halve_lr_every must be a positive epoch count")
        if self.strategy is Strategy.GENERAL_ADDITIVE:
            raise ValueError("training supports the 'ova' and 'pc' families")


@dataclass
class MlpScorer:
    """Fully connected scorer; ``layer_dims`` runs input -> hidden -> classes."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, layer_dims: Sequence[int], seed: int = 0) -> "MlpScorer":
        dims = tuple(int(d) for d in layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ValueError(f"bad layer dims {dims}")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims, dims[1:]):
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(layer_dims=dims, weights=weights, biases=biases)

    @property
    def k(self) -> int:
        return self.layer_dims[-1]

    def _forward_full(self, x: np.ndarray):
        # Returns all layer activations; the last entry is the score matrix.
        acts = [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ w.T + b)
            acts.append(h)
        squashed = np.tanh(h @ self.weights[-1].T + self.biases[-1])
        acts.append(0.5 * squashed)
        return acts

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layer_dims[0]:
            raise ValueError(
                f"expected features of width {self.layer_dims[0]}, got shape {x.shape}"
            )
        scores = self._forward_full(x)[-1]
        return scores[0] if single else scores

    __call__ = forward

    def parameters(self):
        yield from self.weights
        yield from self.biases

    def copy(self) -> "MlpScorer":
        return MlpScorer(
            layer_dims=self.layer_dims,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def _batch_objective(
    model: MlpScorer,
    features: np.ndarray,
    member: np.ndarray,
    scheme: LossScheme,
    weight_decay: float,
):
    """Objective, parameter gradients, and plain risk for one batch.

    Objective = mean over the batch of (K-1)/(K-N_i) * set_loss_i, plus
    (weight_decay / 2) * sum of squared parameters.
    """
    k = scheme.k
    grads_w = [np.zeros_like(w) for w in model.weights]
    grads_b = [np.zeros_like(b) for b in model.biases]
    risk = 0.0
    batch = features.shape[0]
    if batch > 0:
        acts = model._forward_full(features)
        scores = acts[-1]
        sizes = member.sum(axis=1)
        rescale = (k - 1) / (k - sizes) / batch
        losses = candidate_losses_batch(scheme, scores, member)
        risk = float((rescale * losses).sum())
        d_scores = rescale[:, None] * candidate_grads_batch(scheme, scores, member)
        # Output squash g = 0.5 * tanh(u): dg/du = 0.5 - 2 g^2.
        delta = d_scores * (0.5 - 2.0 * scores**2)
        for layer in range(len(model.weights) - 1, -1, -1):
            grads_w[layer] = delta.T @ acts[layer]
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ model.weights[layer]) * (1.0 - acts[layer] ** 2)
    objective = risk
    if weight_decay != 0.0:
        squares = 0.0
        for p, grad in zip(model.parameters(), _chain(grads_w, grads_b)):
            grad += weight_decay * p
            squares += float((p**2).sum())
        objective += 0.5 * weight_decay * squares
    return objective, grads_w, grads_b, risk


def _chain(grads_w, grads_b):
    yield from grads_w
    yield from grads_b


def backward(
    model: MlpScorer,
    batch: Sequence[AnnotatedExample],
    scheme: LossScheme,
    weight_decay: float = 0.0,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Batch objective and its exact parameter gradients.

    The objective is the mean rescaled candidate-set loss plus the L2
    term; an empty batch leaves only the L2 part.
    """
    if scheme.k != model.k:
        raise ValueError("scheme and model disagree on the class count")
    if len(batch) == 0:
        features = np.zeros((0, model.layer_dims[0]))
        member = np.zeros((0, scheme.k), dtype=bool)
    else:
        features, member = examples_arrays(batch, scheme.k)
    objective, grads_w, grads_b, _ = _batch_objective(model, features, member, scheme, weight_decay)
    return objective, grads_w, grads_b


def train(
    model: MlpScorer,
    examples: Sequence[AnnotatedExample],
    config: TrainConfig,
) -> tuple[MlpScorer, list[float]]:
    """Minibatch training on candidate annotations; returns (model, risk curve).

    The model is updated in place.  Shuffling and batching are driven
    entirely by ``config.seed``; the curve records the mean rescaled
    training risk per epoch.  Non-finite parameters or risk raise
    :class:`TrainingDivergedError` with the offending epoch.
    """
    if len(examples) == 0:
        raise ValueError("no training examples")
    scheme = scheme_for(config.strategy, model.k)
    features, member = examples_arrays(examples, scheme.k)
    sizes = member.sum(axis=1)
    if not config.allow_mixed_n and sizes.min() != sizes.max():
        raise ValueError(
            "training data mixes candidate-set sizes; set allow_mixed_n=True"
        )
    rng = np.random.default_rng(config.seed)
    count = features.shape[0]
    params = list(model.parameters())
    moment1 = [np.zeros_like(p) for p in params]
    moment2 = [np.zeros_like(p) for p in params]
    step = 0
    curve: list[float] = []
    # divergence is detected explicitly, so don't warn on the way there
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            lr = config.learning_rate
            if config.halve_lr_every is not None:
                lr *= 0.5 ** (epoch // config.halve_lr_every)
            order = rng.permutation(count)
            epoch_risk = 0.0
            for start in range(0, count, config.batch_size):
                idx = order[start : start + config.batch_size]
                try:
                    _, grads_w, grads_b, risk = _batch_objective(
                        model, features[idx], member[idx], scheme, config.weight_decay
                    )
                except ValueError:
                    # mid-epoch parameter blowup, not a data problem
                    if not all(np.all(np.isfinite(p)) for p in params):
                        raise TrainingDivergedError(epoch) from None
                    raise
                epoch_risk += risk * idx.size
                step += 1
                for p, g, m1, m2 in zip(params, _chain(grads_w, grads_b), moment1, moment2):
                    if config.optimizer == "sgd":
                        p -= lr * g
                    else:
                        m1 *= ADAM_BETA1
                        m1 += (1.0 - ADAM_BETA1) * g
                        m2 *= ADAM_BETA2
                        m2 += (1.0 - ADAM_BETA2) * g**2
                        hat1 = m1 / (1.0 - ADAM_BETA1**step)
                        hat2 = m2 / (1.0 - ADAM_BETA2**step)
                        p -= lr * hat1 / (np.sqrt(hat2) + ADAM_EPS)
            curve.append(epoch_risk / count)
            finite = np.isfinite(curve[-1]) and all(np.all(np.isfinite(p)) for p in params)
            if not finite:
                raise TrainingDivergedError(epoch)
    return model, curve


def config_hash(config: TrainConfig | None) -> str | None:
    if config is None:
        return None
    payload = asdict(config)
    payload["strategy"] = config.strategy.value
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return digest


def save_checkpoint(
    model: MlpScorer,
    path,
    seed: int | None = None,
    config: TrainConfig | None = None,
) -> None:
    """Persist the scorer as a versioned text record (bit-exact round trip)."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_dims": list(model.layer_dims),
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "seed": seed,
        "config_hash": config_hash(config),
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> MlpScorer:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a scorer checkpoint: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    dims = tuple(int(d) for d in payload["layer_dims"])
    weights = [np.asarray(w, dtype=float) for w in payload["weights"]]
    biases = [np.asarray(b, dtype=float) for b in payload["biases"]]
    model = MlpScorer(layer_dims=dims, weights=weights, biases=biases)
    for w, b, fan_in, fan_out in zip(weights, biases, dims, dims[1:]):
        if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
            raise ValueError("checkpoint parameter shapes disagree with layer dims")
    return model
