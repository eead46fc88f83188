"""Single-hidden-layer perceptron: activations, losses, forward/backward.

Everything here is plain numpy at float64.  Functions accept either one
sample (1-D input) or a batch (2-D, one sample per row); batch gradients are
summed over rows, so a mean loss must carry its own ``1/n`` in the upstream
gradient, which is what :func:`huber_loss` and :func:`bce_loss` return.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, ShapeError

PARAM_NAMES = ("W1", "b1", "W2", "b2")


def _scalar_or_array(x, out):
    return float(out) if np.ndim(x) == 0 else out


def sigmoid(x):
    """Logistic function, evaluated without overflow for any finite ``x``."""
    a = np.asarray(x, dtype=np.float64)
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ez = np.exp(a[~pos])
    out[~pos] = ez / (1.0 + ez)
    return _scalar_or_array(x, out)


def softplus(x):
    """``log(1 + exp(x))`` as ``max(x, 0) + log1p(exp(-|x|))``."""
    a = np.asarray(x, dtype=np.float64)
    out = np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(a)))
    return _scalar_or_array(x, out)


def log_sigmoid(x):
    """``log(sigmoid(x))``, i.e. ``-softplus(-x)``."""
    a = np.asarray(x, dtype=np.float64)
    out = -softplus(-a)
    return _scalar_or_array(x, np.asarray(out))


class ActivationKind(str, enum.Enum):
    IDENTITY = "identity"
    SIGMOID = "sigmoid"
    LOG_SIGMOID = "log_sigmoid"
    SOFTPLUS = "softplus"

    def value_of(self, x):
        if self is ActivationKind.IDENTITY:
            return np.array(x, dtype=np.float64, copy=True)
        if self is ActivationKind.SIGMOID:
            return sigmoid(x)
        if self is ActivationKind.LOG_SIGMOID:
            return log_sigmoid(x)
        return softplus(x)

    def derivative(self, x):
        if self is ActivationKind.IDENTITY:
            return np.ones_like(np.asarray(x, dtype=np.float64))
        if self is ActivationKind.SIGMOID:
            s = sigmoid(x)
            return s * (1.0 - s)
        if self is ActivationKind.LOG_SIGMOID:
            return sigmoid(-np.asarray(x, dtype=np.float64))
        return sigmoid(x)


@dataclass(frozen=True)
class PerceptronNet:
    """Weights of an ``n_in -> n_hidden -> n_out`` network with linear output.

    ``W1`` is ``(n_hidden, n_in)`` and ``W2`` is ``(n_out, n_hidden)``.  The
    neuron threshold is carried as an additive bias.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    hidden_activation: ActivationKind = ActivationKind.SIGMOID

    def __post_init__(self):
        arrays = {}
        for name in PARAM_NAMES:
            a = np.array(getattr(self, name), dtype=np.float64)
            a.setflags(write=False)
            arrays[name] = a
            object.__setattr__(self, name, a)
        object.__setattr__(self, "hidden_activation", ActivationKind(self.hidden_activation))
        W1, b1, W2, b2 = (arrays[n] for n in PARAM_NAMES)
        if W1.ndim != 2 or W2.ndim != 2 or b1.ndim != 1 or b2.ndim != 1:
            raise ShapeError("W1/W2 must be matrices and b1/b2 vectors")
        if b1.shape[0] != W1.shape[0] or W2.shape[1] != W1.shape[0] or b2.shape[0] != W2.shape[0]:
            raise ShapeError(
                f"inconsistent layer shapes: W1{W1.shape} b1{b1.shape} W2{W2.shape} b2{b2.shape}"
            )
        for name, a in arrays.items():
            if not np.all(np.isfinite(a)):
                raise DomainError(f"{name} contains non-finite entries")

    @property
    def n_in(self) -> int:
        return self.W1.shape[1]

    @property
    def n_hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def n_out(self) -> int:
        return self.W2.shape[0]

    @property
    def output_activation(self) -> ActivationKind:
        return ActivationKind.IDENTITY

    @property
    def topology(self) -> tuple[int, int, int]:
        return (self.n_in, self.n_hidden, self.n_out)

    def params(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, n) for n in PARAM_NAMES)

    def with_params(self, W1, b1, W2, b2) -> "PerceptronNet":
        return PerceptronNet(W1, b1, W2, b2, self.hidden_activation)

    @classmethod
    def zeros(cls, n_in, n_hidden, n_out, hidden_activation=ActivationKind.SIGMOID):
        return cls(
            np.zeros((n_hidden, n_in)),
            np.zeros(n_hidden),
            np.zeros((n_out, n_hidden)),
            np.zeros(n_out),
            hidden_activation,
        )


class ForwardCache(NamedTuple):
    input: np.ndarray
    hidden_pre: np.ndarray
    hidden_post: np.ndarray
    output: np.ndarray


@dataclass(frozen=True)
class Gradients:
    dW1: np.ndarray
    db1: np.ndarray
    dW2: np.ndarray
    db2: np.ndarray

    def as_tuple(self) -> tuple[np.ndarray, ...]:
        return (self.dW1, self.db1, self.dW2, self.db2)


class LossKind(NamedTuple):
    tag: str
    huber_delta: float = 1.0

    @classmethod
    def huber(cls, delta: float = 1.0) -> "LossKind":
        if not delta > 0:
            raise DomainError(f"huber_delta must be positive, got {delta}")
        return cls("huber", float(delta))

    @classmethod
    def bce(cls) -> "LossKind":
        return cls("bce_with_logit")


def forward(net: PerceptronNet, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.n_in:
        raise ShapeError(f"expected input length {net.n_in}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DomainError("input contains non-finite entries")
    hidden_pre = x @ net.W1.T + net.b1
    hidden_post = net.hidden_activation.value_of(hidden_pre)
    output = hidden_post @ net.W2.T + net.b2
    return output, ForwardCache(x, hidden_pre, hidden_post, output)


def predict(net: PerceptronNet, x) -> np.ndarray:
    return forward(net, x)[0]


def backward(net: PerceptronNet, cache: ForwardCache, dloss_doutput) -> Gradients:
    d_out = np.asarray(dloss_doutput, dtype=np.float64)
    if d_out.shape != cache.output.shape:
        raise ShapeError(f"upstream gradient shape {d_out.shape} != output shape {cache.output.shape}")
    x = np.atleast_2d(cache.input)
    h_pre = np.atleast_2d(cache.hidden_pre)
    h_post = np.atleast_2d(cache.hidden_post)
    d_out = np.atleast_2d(d_out)

    dW2 = d_out.T @ h_post
    db2 = d_out.sum(axis=0)
    d_hidden = (d_out @ net.W2) * net.hidden_activation.derivative(h_pre)
    dW1 = d_hidden.T @ x
    db1 = d_hidden.sum(axis=0)
    return Gradients(dW1, db1, dW2, db2)


def huber_loss(pred, target, delta: float = 1.0) -> tuple[float, np.ndarray]:
    """Mean smooth-L1 loss; quadratic while ``|pred - target| < delta``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    if pred.size == 0:
        raise ShapeError("huber_loss needs at least one element")
    err = pred - target
    abs_err = np.abs(err)
    z = np.where(abs_err < delta, 0.5 * err**2, delta * (abs_err - 0.5 * delta))
    n = pred.size
    grad = np.clip(err, -delta, delta) / n
    return float(z.mean()), grad


def bce_loss(logit, target):
    """Binary cross-entropy of ``sigmoid(logit)`` against a 0/1 target.

    Scalars give ``(loss, dloss/dlogit)``; arrays give the mean loss and the
    per-element gradient of that mean.
    """
    z = np.asarray(logit, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if z.shape != t.shape:
        raise ShapeError(f"logit shape {z.shape} != target shape {t.shape}")
    if not np.all((t == 0.0) | (t == 1.0)):
        raise DomainError("bce targets must be 0 or 1")
    per = softplus(z) - t * z
    grad = sigmoid(z) - t
    if z.ndim == 0:
        return float(per), float(grad)
    if z.size == 0:
        raise ShapeError("bce_loss needs at least one element")
    return float(np.mean(per)), grad / z.size


def evaluate_loss(kind: LossKind, output, target) -> tuple[float, np.ndarray]:
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64).reshape(output.shape)
    if kind.tag == "huber":
        return huber_loss(output, target, kind.huber_delta)
    if kind.tag == "bce_with_logit":
        return bce_loss(output, target)
    raise DomainError(f"unknown loss {kind.tag!r}")


def hidden_size(n_in: int, n_out: int) -> int:
    """Hidden width: ceiling of the mean of input and output widths."""
    if n_in < 1 or n_out < 1:
        raise DomainError(f"layer sizes must be positive, got ({n_in}, {n_out})")
    return -(-(n_in + n_out) // 2)


_EXT = np.longdouble


def _activation_ext(kind: ActivationKind, z):
    if kind is ActivationKind.IDENTITY:
        return z
    if kind is ActivationKind.SIGMOID:
        e = np.exp(-np.abs(z))
        return np.where(z >= 0, 1 / (1 + e), e / (1 + e))
    if kind is ActivationKind.SOFTPLUS:
        return np.maximum(z, 0) + np.log1p(np.exp(-np.abs(z)))
    return np.minimum(z, 0) - np.log1p(np.exp(-np.abs(z)))


def _loss_ext(net: PerceptronNet, params, loss: LossKind, x, y):
    """Forward pass and loss in extended precision, written independently of
    :func:`forward` so the finite differences are a separate route."""
    W1, b1, W2, b2 = params
    out = _activation_ext(net.hidden_activation, x @ W1.T + b1) @ W2.T + b2
    y = y.reshape(out.shape)
    if loss.tag == "huber":
        d = _EXT(loss.huber_delta)
        e = np.abs(out - y)
        per = np.where(e < d, e * e / 2, d * (e - d / 2))
    else:
        per = np.maximum(out, 0) + np.log1p(np.exp(-np.abs(out))) - y * out
    return per.mean()


def gradient_check(net: PerceptronNet, loss: LossKind, sample, h: float = 1e-5) -> float:
    """Largest relative gap between backprop and central differences.

    ``sample`` is ``(inputs, targets)``; inputs may hold one row or many.
    The perturbed losses are evaluated in ``np.longdouble`` so that round-off
    in the difference quotient stays well below the 1e-8 denominator floor;
    on platforms where ``longdouble`` is plain double this degrades to
    ordinary float64 differences.
    """
    if not 0 < h <= 1e-3:
        raise DomainError(f"step h must lie in (0, 1e-3], got {h}")
    x, y = sample
    out, cache = forward(net, x)
    _, d_out = evaluate_loss(loss, out, y)
    analytic = backward(net, cache, d_out).as_tuple()

    xe = np.atleast_2d(np.asarray(x, dtype=_EXT))
    ye = np.asarray(y, dtype=_EXT)
    params = [p.astype(_EXT) for p in net.params()]
    step = _EXT(h)
    worst = 0.0
    for k, p in enumerate(params):
        for idx in np.ndindex(p.shape):
            orig = p[idx]
            p[idx] = orig + step
            up = _loss_ext(net, params, loss, xe, ye)
            p[idx] = orig - step
            down = _loss_ext(net, params, loss, xe, ye)
            p[idx] = orig
            numeric = float((up - down) / (2 * step))
            a = float(analytic[k][idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst


def uniform_limit(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))
