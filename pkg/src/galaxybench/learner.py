"""Desk-scale probabilistic classifiers trained by minibatch SGD.

Two architectures: a softmax-linear model and a one-hidden-layer tanh
network.  Both are trained from a fresh initialization on every call
(never warm-started) so retraining inside the active-learning loop is
deterministic and independent of query order history.

Numeric conventions: float64 throughout, softmax with max-logit
subtraction, cross-entropy via log-sum-exp.  The l2 penalty is
``0.5 * l2 * sum(W**2)`` over weight matrices (biases excluded).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, PredictionMatrix
from .errors import DegenerateInput, DimensionMismatch

KIND_LINEAR = "softmax-linear"
KIND_MLP = "mlp-1hidden"


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = KIND_LINEAR
    hidden_units: int = 32
    epochs: int = 60
    learning_rate: float = 0.1
    minibatch_size: int = 64
    l2: float = 1e-4
    init_seed: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_LINEAR, KIND_MLP):
            raise ValueError(f"unknown learner kind {self.kind!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be non-negative")
        if self.kind == KIND_MLP and self.hidden_units < 1:
            raise ValueError("hidden_units must be positive")


def parameter_count(config: LearnerConfig, num_classes: int, dim: int) -> int:
    if config.kind == KIND_LINEAR:
        return dim * num_classes + num_classes
    h = config.hidden_units
    return dim * h + h + h * num_classes + num_classes


@dataclass(frozen=True)
class Model:
    """Immutable trained model: flat parameter vector plus shape metadata."""

    parameters: np.ndarray
    config: LearnerConfig
    num_classes: int
    dim: int

    def __post_init__(self):
        params = np.asarray(self.parameters, dtype=np.float64)
        expected = parameter_count(self.config, self.num_classes, self.dim)
        if params.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got {params.shape}")
        if not np.all(np.isfinite(params)):
            raise ValueError("model parameters must be finite")
        params = params.copy()
        params.setflags(write=False)
        object.__setattr__(self, "parameters", params)


def _unpack(params: np.ndarray, config: LearnerConfig, num_classes: int, dim: int):
    """Views into the flat vector: ((W, b), ...) one pair per layer."""
    if config.kind == KIND_LINEAR:
        w_end = dim * num_classes
        return ((params[:w_end].reshape(dim, num_classes), params[w_end:]),)
    h = config.hidden_units
    o = 0
    w1 = params[o : o + dim * h].reshape(dim, h)
    o += dim * h
    b1 = params[o : o + h]
    o += h
    w2 = params[o : o + h * num_classes].reshape(h, num_classes)
    o += h * num_classes
    b2 = params[o:]
    return ((w1, b1), (w2, b2))


def _softmax_inplace(logits: np.ndarray) -> np.ndarray:
    logits -= logits.max(axis=1, keepdims=True)
    np.exp(logits, out=logits)
    logits /= logits.sum(axis=1, keepdims=True)
    return logits


def _forward(params, config, num_classes, dim, features):
    """Logits plus hidden activations (needed for backprop)."""
    layers = _unpack(params, config, num_classes, dim)
    if config.kind == KIND_LINEAR:
        (w, b), = layers
        return features @ w + b, None
    (w1, b1), (w2, b2) = layers
    hidden = np.tanh(features @ w1 + b1)
    return hidden @ w2 + b2, hidden


def init_model(config: LearnerConfig, num_classes: int, dim: int, seed: int | None = None) -> Model:
    """Fresh model with parameters uniform in [-1/sqrt(dim), 1/sqrt(dim)]."""
    if seed is None:
        seed = config.init_seed
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    n = parameter_count(config, num_classes, dim)
    params = rng.uniform(-scale, scale, size=n)
    return Model(params, config, num_classes, dim)


def _check_batch(model_dim: int, features: np.ndarray, labels: np.ndarray, num_classes: int):
    if features.ndim != 2 or features.shape[1] != model_dim:
        raise DimensionMismatch(
            f"features have dimension {features.shape[-1] if features.ndim else '?'}, model expects {model_dim}"
        )
    if len(features) != len(labels):
        raise ValueError("features and labels must have equal length")
    if len(features) == 0:
        raise ValueError("batch must be non-empty")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError("labels must lie in [0, num_classes)")


def loss_and_gradient(model: Model, features, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus l2 penalty, with the analytic gradient.

    The gradient has the same length and layout as ``model.parameters``.
    Duplicating batch rows leaves both outputs unchanged (mean reduction).
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _check_batch(model.dim, features, labels, model.num_classes)
    params = model.parameters
    config = model.config
    grad = np.zeros_like(params)
    glayers = _unpack(grad, config, model.num_classes, model.dim)
    layers = _unpack(params, config, model.num_classes, model.dim)

    logits, hidden = _forward(params, config, model.num_classes, model.dim, features)
    m = len(features)
    # log-sum-exp with max subtraction; loss before the penalty term
    zmax = logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(logits - zmax).sum(axis=1)) + zmax[:, 0]
    loss = float(np.mean(lse - logits[np.arange(m), labels]))

    delta = np.exp(logits - zmax)
    delta /= delta.sum(axis=1, keepdims=True)
    delta[np.arange(m), labels] -= 1.0
    delta /= m

    if config.kind == KIND_LINEAR:
        (w, _), = layers
        (gw, gb), = glayers
        gw[...] = features.T @ delta
        gb[...] = delta.sum(axis=0)
        penalty_w = (w,)
        penalty_g = (gw,)
    else:
        (w1, _), (w2, _) = layers
        (gw1, gb1), (gw2, gb2) = glayers
        gw2[...] = hidden.T @ delta
        gb2[...] = delta.sum(axis=0)
        dh = (delta @ w2.T) * (1.0 - hidden * hidden)
        gw1[...] = features.T @ dh
        gb1[...] = dh.sum(axis=0)
        penalty_w = (w1, w2)
        penalty_g = (gw1, gw2)

    if config.l2 > 0:
        for w, gw in zip(penalty_w, penalty_g):
            loss += 0.5 * config.l2 * float(np.sum(w * w))
            gw += config.l2 * w
    return loss, grad


def train(config: LearnerConfig, features, labels, num_classes: int, seed: int | None = None) -> Model:
    """Train a model from scratch on the labeled set.

    ``features`` is (m, d), ``labels`` (m,).  Deterministic given
    (config, row order, seed); ``seed`` defaults to ``config.init_seed``
    and drives both initialization and epoch shuffling.
    """
    features = np.ascontiguousarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not np.all(np.isfinite(features)):
        raise DegenerateInput("training features contain non-finite values")
    dim = features.shape[1] if features.ndim == 2 else -1
    _check_batch(dim, features, labels, num_classes)
    if seed is None:
        seed = config.init_seed
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    params = rng.uniform(-scale, scale, size=parameter_count(config, num_classes, dim))
    layers = _unpack(params, config, num_classes, dim)

    m = len(features)
    mb = min(config.minibatch_size, m)
    lr = config.learning_rate
    l2 = config.l2
    row_idx = np.arange(mb)
    linear = config.kind == KIND_LINEAR

    for _ in range(config.epochs):
        perm = rng.permutation(m)
        for start in range(0, m, mb):
            idx = perm[start : start + mb]
            xb = features[idx]
            yb = labels[idx]
            k = len(idx)
            if linear:
                (w, b), = layers
                z = xb @ w
                z += b
                _softmax_inplace(z)
                z[row_idx[:k], yb] -= 1.0
                z /= k
                gw = xb.T @ z
                if l2:
                    gw += l2 * w
                w -= lr * gw
                b -= lr * z.sum(axis=0)
            else:
                (w1, b1), (w2, b2) = layers
                hid = np.tanh(xb @ w1 + b1)
                z = hid @ w2
                z += b2
                _softmax_inplace(z)
                z[row_idx[:k], yb] -= 1.0
                z /= k
                gw2 = hid.T @ z
                if l2:
                    gw2 += l2 * w2
                dh = (z @ w2.T) * (1.0 - hid * hid)
                gw1 = xb.T @ dh
                if l2:
                    gw1 += l2 * w1
                w2 -= lr * gw2
                b2 -= lr * z.sum(axis=0)
                w1 -= lr * gw1
                b1 -= lr * dh.sum(axis=0)

    return Model(params, config, num_classes, dim)


def predict_proba(model: Model, features) -> np.ndarray:
    """Class-probability vector (softmax of logits) for one feature vector."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.dim,):
        raise DimensionMismatch(f"expected a vector of dimension {model.dim}")
    logits, _ = _forward(
        model.parameters, model.config, model.num_classes, model.dim, features[None, :]
    )
    return _softmax_inplace(logits)[0]


def predict_matrix(model: Model, dataset: Dataset) -> PredictionMatrix:
    """Probability rows for every example in the dataset, indexed by id."""
    if dataset.dim != model.dim:
        raise DimensionMismatch(
            f"dataset dimension {dataset.dim} does not match model dimension {model.dim}"
        )
    logits, _ = _forward(
        model.parameters, model.config, model.num_classes, model.dim, dataset.features
    )
    return PredictionMatrix(dataset.ids, _softmax_inplace(logits))


def model_to_dict(model: Model) -> dict:
    """JSON-ready form: shape header plus the flat parameter array."""
    return {
        "kind": model.config.kind,
        "num_classes": model.num_classes,
        "dim": model.dim,
        "hidden_units": model.config.hidden_units if model.config.kind == KIND_MLP else None,
        "parameters": [repr(float(v)) for v in model.parameters],
    }


def model_from_dict(payload: dict, config: LearnerConfig | None = None) -> Model:
    """Inverse of :func:`model_to_dict`; round-trips parameters bit-exactly."""
    if config is None:
        config = LearnerConfig(
            kind=payload["kind"],
            hidden_units=payload["hidden_units"] or 32,
        )
    params = np.array([float(v) for v in payload["parameters"]])
    return Model(params, config, payload["num_classes"], payload["dim"])
