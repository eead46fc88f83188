"""Splitting, standardization, optimizers, the training loop and model files."""

from __future__ import annotations

import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (
    DivergenceError,
    DomainError,
    FormatVersionError,
    ModelShapeError,
    ShapeError,
    TruncatedModelError,
)
from .nn_core import (
    ActivationKind,
    Gradients,
    LossKind,
    PerceptronNet,
    backward,
    evaluate_loss,
    forward,
    hidden_size,
    sigmoid,
    uniform_limit,
)

log = logging.getLogger(__name__)

MODEL_FORMAT = "ptfm-model/1"
STD_FLOOR = 1e-8
PHASES = ("tactical", "operational_a0", "operational_a14", "strategic")
REGIMES = ("non_disrupted", "disrupted")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


# --------------------------------------------------------------------------
# splitting
# --------------------------------------------------------------------------


def splitmix64(seed: int, n: int) -> list[int]:
    """First ``n`` outputs of SplitMix64 started from ``seed``.

    state += 0x9E3779B97F4A7C15; z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)          (all arithmetic mod 2**64)
    """
    out = []
    state = seed & _MASK64
    for _ in range(n):
        state = (state + _GOLDEN) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        out.append(z ^ (z >> 31))
    return out


def seeded_permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates shuffle of ``range(n)`` driven by SplitMix64.

    For ``i = n-1 .. 1`` the swap partner is ``j = (r * (i + 1)) >> 64`` where
    ``r`` is the next SplitMix64 output.  Plain integers make the sequence
    reproducible in any language with 64-bit unsigned arithmetic.
    """
    perm = list(range(n))
    draws = splitmix64(seed, max(n - 1, 0))
    for k, i in enumerate(range(n - 1, 0, -1)):
        j = (draws[k] * (i + 1)) >> 64
        perm[i], perm[j] = perm[j], perm[i]
    return perm


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 42

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise DomainError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.seed < 0:
            raise DomainError("seed must be non-negative")

    def n_train(self, n: int) -> int:
        # round half up; Python's round() is banker's rounding
        return int(math.floor(self.train_fraction * n + 0.5))


def split_dataset(records: Sequence, spec: SplitSpec = SplitSpec()) -> tuple[list, list]:
    if len(records) == 0:
        raise DomainError("cannot split an empty dataset")
    perm = seeded_permutation(len(records), spec.seed)
    cut = spec.n_train(len(records))
    train = [records[i] for i in perm[:cut]]
    test = [records[i] for i in perm[cut:]]
    return train, test


# --------------------------------------------------------------------------
# standardization
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=np.float64)
        stds = np.array(self.stds, dtype=np.float64)
        if means.shape != stds.shape or means.ndim != 1:
            raise ShapeError("means and stds must be vectors of equal length")
        if np.any(stds <= 0):
            raise DomainError("standard deviations must be positive")
        means.setflags(write=False)
        stds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def n_features(self) -> int:
        return self.means.shape[0]

    def transform(self, rows) -> np.ndarray:
        return apply_standardizer(self, rows)

    def inverse(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        self._check(rows)
        return rows * self.stds + self.means

    def _check(self, rows):
        if rows.shape[-1:] != (self.n_features,):
            raise ShapeError(f"expected {self.n_features} features, got shape {rows.shape}")


def fit_standardizer(train_matrix) -> Standardizer:
    """Column means and population standard deviations (floored at 1e-8)."""
    X = np.asarray(train_matrix, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected a rows x features matrix, got shape {X.shape}")
    if X.shape[0] < 2:
        raise DomainError("need at least 2 rows to fit a standardizer")
    return Standardizer(X.mean(axis=0), np.maximum(X.std(axis=0), STD_FLOOR))


def apply_standardizer(s: Standardizer, rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    s._check(rows)
    return (rows - s.means) / s.stds


# --------------------------------------------------------------------------
# initialization and optimizers
# --------------------------------------------------------------------------


def init_weights(n_in, n_hidden, n_out, hidden=ActivationKind.SIGMOID, seed=0) -> PerceptronNet:
    """Glorot-uniform weights, zero biases, reproducible from ``seed``."""
    if min(n_in, n_hidden, n_out) < 1:
        raise DomainError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    lim1 = uniform_limit(n_in, n_hidden)
    lim2 = uniform_limit(n_hidden, n_out)
    W1 = rng.uniform(-lim1, lim1, size=(n_hidden, n_in))
    W2 = rng.uniform(-lim2, lim2, size=(n_out, n_hidden))
    return PerceptronNet(W1, np.zeros(n_hidden), W2, np.zeros(n_out), hidden)


def delta_rule_step(net: PerceptronNet, grads: Gradients, theta: float) -> PerceptronNet:
    """Plain gradient step ``p <- p - theta * g`` on every parameter."""
    if not theta > 0:
        raise DomainError(f"theta must be positive, got {theta}")
    return net.with_params(*(p - theta * g for p, g in zip(net.params(), grads.as_tuple())))


@dataclass(frozen=True)
class AdamState:
    m: tuple
    v: tuple
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    learning_rate: float = 1e-3

    @classmethod
    def for_net(cls, net: PerceptronNet, **hyper) -> "AdamState":
        zeros = tuple(np.zeros_like(p) for p in net.params())
        return cls(m=zeros, v=tuple(z.copy() for z in zeros), **hyper)


def adam_step(net: PerceptronNet, grads: Gradients, state: AdamState) -> tuple[PerceptronNet, AdamState]:
    params = net.params()
    g = grads.as_tuple()
    if any(p.shape != a.shape for p, a in zip(params, state.m)):
        raise ShapeError("Adam state does not match the network's parameter shapes")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    m = tuple(b1 * mi + (1 - b1) * gi for mi, gi in zip(state.m, g))
    v = tuple(b2 * vi + (1 - b2) * gi * gi for vi, gi in zip(state.v, g))
    c1 = 1 - b1**t
    c2 = 1 - b2**t
    new = tuple(
        p - state.learning_rate * (mi / c1) / (np.sqrt(vi / c2) + state.epsilon)
        for p, mi, vi in zip(params, m, v)
    )
    return net.with_params(*new), replace(state, m=m, v=v, t=t)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15000
    seed: int = 0
    learning_rate: float = 1e-3
    loss: LossKind = LossKind.huber()
    optimizer: str = "adam"  # or "delta"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    plateau_window: int = 500

    def __post_init__(self):
        if self.epochs < 1:
            raise DomainError("epochs must be at least 1")
        if self.optimizer not in ("adam", "delta"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise DomainError("learning_rate must be positive")


@dataclass(frozen=True)
class TrainedModel:
    net: PerceptronNet
    standardizer: Standardizer
    loss_history: np.ndarray
    phase: str = "tactical"
    regime: str = "non_disrupted"
    role: str | None = None
    seeds: dict = field(default_factory=dict)
    feature_names: tuple = ()
    target_name: str = ""
    n_train: int = 0

    def predict_raw(self, rows) -> np.ndarray:
        """Standardize raw feature rows, then return the linear output."""
        out, _ = forward(self.net, self.standardizer.transform(rows))
        return out

    def predict(self, rows) -> np.ndarray:
        """Regression value, or probability for the operational classifiers."""
        out = self.predict_raw(rows)
        if self.phase.startswith("operational"):
            return np.asarray(sigmoid(out))
        return out

    def loss_summary(self, window: int | None = None) -> dict:
        return plateau_report(self.loss_history, window or 500)


def plateau_report(loss_history, window: int = 500) -> dict:
    """Summary of the loss curve; never used to stop training."""
    h = np.asarray(loss_history, dtype=np.float64)
    w = max(1, min(window, len(h)))
    first, last = float(h[:w].mean()), float(h[-w:].mean())
    return {
        "epochs": int(len(h)),
        "first_loss": float(h[0]),
        "final_loss": float(h[-1]),
        "min_loss": float(h.min()),
        "window": int(w),
        "first_window_mean": first,
        "final_window_mean": last,
        "final_window_rel_change": float(abs(h[-w] - h[-1]) / max(abs(h[-w]), 1e-12)),
    }


def train(
    inputs,
    targets,
    topology: tuple,
    cfg: TrainConfig,
    standardizer: Standardizer | None = None,
    **metadata,
) -> TrainedModel:
    """Full-batch training: one optimizer step per epoch over all rows.

    ``inputs`` must already be standardized.  ``topology`` is
    ``(n_in, n_hidden, n_out, hidden_activation)``.  Extra keyword arguments
    (phase, regime, role, feature_names, ...) are stored on the model.
    """
    X = np.asarray(inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    n_in, n_hidden, n_out, hidden = topology
    if Y.ndim == 1:
        Y = Y.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != n_in:
        raise ShapeError(f"inputs must be rows x {n_in}, got {X.shape}")
    if Y.shape != (X.shape[0], n_out):
        raise ShapeError(f"targets shape {Y.shape} does not match {X.shape[0]} rows x {n_out}")

    net = init_weights(n_in, n_hidden, n_out, ActivationKind(hidden), cfg.seed)
    adam = AdamState.for_net(
        net, beta1=cfg.beta1, beta2=cfg.beta2, epsilon=cfg.epsilon, learning_rate=cfg.learning_rate
    )
    history = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        out, cache = forward(net, X)
        loss, d_out = evaluate_loss(cfg.loss, out, Y)
        if not math.isfinite(loss):
            raise DivergenceError(epoch, loss)
        history[epoch] = loss
        grads = backward(net, cache, d_out)
        if cfg.optimizer == "adam":
            net, adam = adam_step(net, grads, adam)
        else:
            net = delta_rule_step(net, grads, cfg.learning_rate)
    if standardizer is None:
        standardizer = Standardizer(np.zeros(n_in), np.ones(n_in))
    seeds = dict(metadata.pop("seeds", {}))
    seeds.setdefault("init", cfg.seed)
    metadata.setdefault("n_train", int(X.shape[0]))
    history.setflags(write=False)
    return TrainedModel(net=net, standardizer=standardizer, loss_history=history, seeds=seeds, **metadata)


def fit_model(raw_inputs, targets, hidden: ActivationKind, cfg: TrainConfig, **metadata) -> TrainedModel:
    """Fit a standardizer on ``raw_inputs``, size the hidden layer, train."""
    X = np.asarray(raw_inputs, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    n_out = 1 if Y.ndim == 1 else Y.shape[1]
    s = fit_standardizer(X)
    topology = (X.shape[1], hidden_size(X.shape[1], n_out), n_out, hidden)
    return train(s.transform(X), Y, topology, cfg, standardizer=s, **metadata)


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def model_to_dict(m: TrainedModel) -> dict:
    net = m.net
    return {
        "format_version": MODEL_FORMAT,
        "phase": m.phase,
        "regime": m.regime,
        "role": m.role,
        "topology": {"n_in": net.n_in, "n_hidden": net.n_hidden, "n_out": net.n_out},
        "hidden_activation": net.hidden_activation.value,
        "output_activation": net.output_activation.value,
        "feature_names": list(m.feature_names),
        "target_name": m.target_name,
        "n_train": m.n_train,
        "weights": {name: getattr(net, name).tolist() for name in ("W1", "b1", "W2", "b2")},
        "standardizer": {"means": m.standardizer.means.tolist(), "stds": m.standardizer.stds.tolist()},
        "seeds": m.seeds,
        "loss_history_summary": plateau_report(m.loss_history),
        "loss_history": [float(x) for x in m.loss_history],
    }


def model_from_dict(doc: dict) -> TrainedModel:
    if not isinstance(doc, dict):
        raise TruncatedModelError("model document is not a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT:
        raise FormatVersionError(f"unsupported model format {version!r}; expected {MODEL_FORMAT!r}")
    try:
        topo = doc["topology"]
        w = doc["weights"]
        shapes = {
            "W1": (topo["n_hidden"], topo["n_in"]),
            "b1": (topo["n_hidden"],),
            "W2": (topo["n_out"], topo["n_hidden"]),
            "b2": (topo["n_out"],),
        }
        arrays = {}
        for name, shape in shapes.items():
            a = np.array(w[name], dtype=np.float64)
            if a.shape != shape:
                raise ModelShapeError(f"{name} has shape {a.shape}, topology says {shape}")
            arrays[name] = a
        net = PerceptronNet(hidden_activation=ActivationKind(doc["hidden_activation"]), **arrays)
        std = doc["standardizer"]
        s = Standardizer(np.array(std["means"], dtype=np.float64), np.array(std["stds"], dtype=np.float64))
        if s.n_features != net.n_in:
            raise ModelShapeError(f"standardizer has {s.n_features} features, network expects {net.n_in}")
        history = np.array(doc.get("loss_history", []), dtype=np.float64)
        history.setflags(write=False)
        return TrainedModel(
            net=net,
            standardizer=s,
            loss_history=history,
            phase=doc["phase"],
            regime=doc["regime"],
            role=doc.get("role"),
            seeds=dict(doc.get("seeds", {})),
            feature_names=tuple(doc.get("feature_names", ())),
            target_name=doc.get("target_name", ""),
            n_train=int(doc.get("n_train", 0)),
        )
    except ModelShapeError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ShapeError):
            raise ModelShapeError(str(exc)) from exc
        raise TruncatedModelError(f"incomplete model document: {exc!r}") from exc


def dumps_model(m: TrainedModel) -> str:
    return json.dumps(model_to_dict(m), indent=1, sort_keys=True) + "\n"


def save_model(m: TrainedModel, path) -> None:
    """Write atomically so a crash never leaves a half-written model."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(dumps_model(m))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise TruncatedModelError(f"{path}: not a complete JSON document ({exc})") from exc
    return model_from_dict(doc)
