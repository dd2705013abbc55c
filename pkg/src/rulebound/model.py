"""Small dense multi-label classifier with hand-written gradients.

One tanh hidden layer feeding per-label sigmoids, trained by plain SGD on a
masked binary cross-entropy plus an optional rule-violation penalty. Built
for exactness and determinism rather than speed: float64 everywhere, fixed
reduction orders, no hidden state.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import jsonio
from .relax import domain_loss, domain_loss_grad
from .rules import RuleSet
from .supervision import CORRECTION_MODES

BCE_CLAMP = 1e-7


@dataclass
class ModelParams:
    """Dense weights of the two-layer network (also reused as a gradient container)."""

    W1: np.ndarray  # hidden x features
    b1: np.ndarray  # hidden
    W2: np.ndarray  # labels x hidden
    b2: np.ndarray  # labels

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.W2 = np.asarray(self.W2, dtype=np.float64)
        self.b2 = np.asarray(self.b2, dtype=np.float64)
        if self.W1.ndim != 2 or self.W2.ndim != 2 or self.b1.ndim != 1 or self.b2.ndim != 1:
            raise ValueError("weights must be 2-D matrices and biases 1-D vectors")
        if (
            self.b1.shape[0] != self.W1.shape[0]
            or self.W2.shape[1] != self.W1.shape[0]
            or self.b2.shape[0] != self.W2.shape[0]
        ):
            raise ValueError("parameter shapes are inconsistent")

    def as_tuple(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return (self.W1, self.b1, self.W2, self.b2)

    @property
    def n_features(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def n_labels(self) -> int:
        return self.W2.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the training schedule."""

    learning_rate: float = 0.05
    epochs: int = 30
    batch_size: int = 32
    lambda_: float = 1.0  # weight of the rule-violation loss term
    warmup_epochs: int = 5
    tau: float = 0.9  # self-correction confidence threshold
    hidden_units: int = 16
    seed: int = 0
    correction_mode: str = "relabel"

    def __post_init__(self):
        coerce = {
            "learning_rate": float,
            "epochs": int,
            "batch_size": int,
            "lambda_": float,
            "warmup_epochs": int,
            "tau": float,
            "hidden_units": int,
            "seed": int,
        }
        for name, cast in coerce.items():
            raw = getattr(self, name)
            if isinstance(raw, bool):
                raise ValueError(f"{name} must be a number, got {raw!r}")
            try:
                object.__setattr__(self, name, cast(raw))
            except (TypeError, ValueError):
                raise ValueError(f"{name} must be a number, got {raw!r}") from None
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.lambda_ < 0:
            raise ValueError("lambda must be nonnegative")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ValueError("warmup_epochs must lie in [0, epochs]")
        if not 0.5 < self.tau < 1:
            raise ValueError("tau must lie in (0.5, 1)")
        if self.hidden_units < 1:
            raise ValueError("hidden_units must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if self.correction_mode not in CORRECTION_MODES:
            raise ValueError(
                f"correction_mode must be one of {CORRECTION_MODES}, got {self.correction_mode!r}"
            )

    def as_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lambda": self.lambda_,
            "warmup_epochs": self.warmup_epochs,
            "tau": self.tau,
            "hidden_units": self.hidden_units,
            "seed": self.seed,
            "correction_mode": self.correction_mode,
        }


class ForwardCache(NamedTuple):
    x: np.ndarray
    hidden: np.ndarray
    probs: np.ndarray


def init_params(seed: int, n_features: int, n_hidden: int, n_labels: int) -> ModelParams:
    """Seeded uniform init in +-1/sqrt(fan_in); W1 is drawn before W2, row-major; biases zero."""
    if min(n_features, n_hidden, n_labels) < 1:
        raise ValueError("all dimensions must be at least 1")
    rng = np.random.default_rng(seed)
    lim1 = 1.0 / math.sqrt(n_features)
    lim2 = 1.0 / math.sqrt(n_hidden)
    W1 = rng.uniform(-lim1, lim1, size=(n_hidden, n_features))
    W2 = rng.uniform(-lim2, lim2, size=(n_labels, n_hidden))
    return ModelParams(W1, np.zeros(n_hidden), W2, np.zeros(n_labels))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    expz = np.exp(z[~pos])
    out[~pos] = expz / (1.0 + expz)
    return out


def forward(params: ModelParams, X) -> tuple[np.ndarray, ForwardCache]:
    """Per-label probabilities for a batch of feature rows, plus tensors backprop reuses."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.n_features:
        raise ValueError(f"feature matrix has shape {X.shape}, expected (n, {params.n_features})")
    hidden = np.tanh(X @ params.W1.T + params.b1)
    probs = _sigmoid(hidden @ params.W2.T + params.b2)
    return probs, ForwardCache(X, hidden, probs)


def _as_loss_inputs(P, T, M) -> tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    P = np.asarray(P, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    M = np.asarray(M, dtype=np.float64)
    if not (P.shape == T.shape == M.shape):
        raise ValueError("P, T and M must share one shape")
    m = float(M.sum())
    if m == 0:
        raise ValueError("no supervision: mask excludes every entry")
    return P, T, M, m


def bce_masked(P, T, M) -> float:
    """Mean binary cross-entropy over mask-selected entries, probabilities
    clamped to [1e-7, 1 - 1e-7] before the logs."""
    P, T, M, m = _as_loss_inputs(P, T, M)
    clamped = np.clip(P, BCE_CLAMP, 1.0 - BCE_CLAMP)
    loglik = T * np.log(clamped) + (1.0 - T) * np.log1p(-clamped)
    return float(-(loglik * M).sum() / m)


def _bce_grad_probs(P: np.ndarray, T: np.ndarray, M: np.ndarray, m: float) -> np.ndarray:
    clamped = np.clip(P, BCE_CLAMP, 1.0 - BCE_CLAMP)
    # outside the clamp window the loss is locally constant in P
    inside = (P >= BCE_CLAMP) & (P <= 1.0 - BCE_CLAMP)
    grad = np.where(M * inside > 0, (clamped - T) / (clamped * (1.0 - clamped)), 0.0)
    return grad / m


def total_loss_and_grads(
    params: ModelParams, X, T, M, rs: RuleSet, lambda_: float
) -> tuple[float, ModelParams]:
    """Composite loss (masked BCE plus lambda_ times the rule penalty) and its
    exact analytic gradients in every parameter."""
    if lambda_ < 0:
        raise ValueError("lambda must be nonnegative")
    probs, cache = forward(params, X)
    P, T, M, m = _as_loss_inputs(probs, T, M)
    loss = bce_masked(P, T, M)
    grad_probs = _bce_grad_probs(P, T, M, m)
    if lambda_ > 0 and rs.rules:
        loss = loss + lambda_ * domain_loss(rs, P)
        grad_probs = grad_probs + lambda_ * domain_loss_grad(rs, P)
    d_logits = grad_probs * P * (1.0 - P)
    gW2 = d_logits.T @ cache.hidden
    gb2 = d_logits.sum(axis=0)
    d_hidden = d_logits @ params.W2
    d_pre = d_hidden * (1.0 - cache.hidden**2)
    gW1 = d_pre.T @ cache.x
    gb1 = d_pre.sum(axis=0)
    return loss, ModelParams(gW1, gb1, gW2, gb2)


def sgd_step(params: ModelParams, grads: ModelParams, learning_rate: float) -> ModelParams:
    """One plain gradient step; returns new parameters, inputs untouched."""
    if learning_rate <= 0:
        raise ValueError("learning rate must be positive")
    lr = float(learning_rate)
    return ModelParams(
        params.W1 - lr * grads.W1,
        params.b1 - lr * grads.b1,
        params.W2 - lr * grads.W2,
        params.b2 - lr * grads.b2,
    )


# ---- checkpoints ----


def save_model(params: ModelParams, path, seed: int, config: TrainConfig | None = None) -> None:
    """Write one JSON document: dims, seed, row-major weight arrays, config echo."""
    for name in ("W1", "b1", "W2", "b2"):
        if not np.isfinite(getattr(params, name)).all():
            raise ValueError(f"non-finite values in parameter {name}")
    doc = {
        "dims": {
            "n_features": params.n_features,
            "n_hidden": params.n_hidden,
            "n_labels": params.n_labels,
        },
        "seed": int(seed),
        "W1": [float(v) for v in params.W1.ravel()],
        "b1": [float(v) for v in params.b1],
        "W2": [float(v) for v in params.W2.ravel()],
        "b2": [float(v) for v in params.b2],
        "config": config.as_dict() if config is not None else None,
    }
    jsonio.dump(doc, path)


def load_model(path) -> tuple[ModelParams, int, dict | None]:
    """Read a checkpoint back; returns (params, seed, config echo or None)."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise ValueError(f"{path}: invalid JSON: {err.msg}") from None
    try:
        dims = doc["dims"]
        d, h, l = int(dims["n_features"]), int(dims["n_hidden"]), int(dims["n_labels"])
        params = ModelParams(
            np.asarray(doc["W1"], dtype=np.float64).reshape(h, d),
            np.asarray(doc["b1"], dtype=np.float64),
            np.asarray(doc["W2"], dtype=np.float64).reshape(l, h),
            np.asarray(doc["b2"], dtype=np.float64),
        )
        seed = int(doc["seed"])
        config = doc.get("config")
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"{path}: malformed checkpoint: {err}") from None
    if config is not None and not isinstance(config, dict):
        raise ValueError(f"{path}: malformed checkpoint: config echo must be an object")
    return params, seed, config
