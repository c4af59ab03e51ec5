"""Deterministic mini-batch Adam training for CondSelModel and MLP."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigError, DivergenceError, ShapeError
from .model import TASKS, clone, record_loss
from .numeric import Tape


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 64
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    task: str = "regression"
    temperature: float = 1.0
    early_stop_patience: int | None = None

    def validate(self, n=None):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if not self.adam_eps > 0 or not self.temperature > 0:
            raise ConfigError("adam_eps and temperature must be positive")
        if self.batch_size < 1 or (n is not None and self.batch_size > n):
            raise ConfigError(f"batch_size must lie in [1, {n}], got {self.batch_size}")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    seconds: float = 0.0
    stopped_epoch: int | None = None


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params, state


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    """Row permutation for one epoch from a Philox stream keyed by (seed, epoch)."""
    key = (int(seed) & (2**64 - 1)) | (int(epoch) << 64)
    return np.random.Generator(np.random.Philox(key=key)).permutation(n)


def batches(n: int, batch_size: int, seed: int, epoch: int):
    order = epoch_order(n, seed, epoch)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def loss_and_grads(model, xp, xc, Y):
    tape = Tape()
    pred = model.record(tape, tape.const(xp), tape.const(xc))
    loss = record_loss(tape, pred, Y, model.task)
    return float(loss.value), tape.backward(loss)


def dataset_loss(model, data: Dataset) -> float:
    tape = Tape()
    pred = model.record(tape, tape.const(data.Xp), tape.const(data.Xc))
    return float(record_loss(tape, pred, data.Y, model.task).value)


def train(model, train_data: Dataset, config: TrainConfig, val_data: Dataset | None = None):
    """Train a copy of ``model``; the argument itself is left untouched.

    Returns ``(trained_model, history)``. The result depends only on the
    model's initial parameters, the data and ``config``.
    """
    config.validate(train_data.n)
    if model.task != train_data.task:
        raise ConfigError(f"model task {model.task} does not match data task {train_data.task}")
    model = clone(model)
    params = model.parameters()
    state = AdamState()
    history = TrainHistory()
    best = (np.inf, None)
    stale = 0
    start = time.perf_counter()
    for epoch in range(config.epochs):
        total = 0.0
        for b, idx in enumerate(batches(train_data.n, config.batch_size, config.seed, epoch)):
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_grads(model, train_data.Xp[idx], train_data.Xc[idx], train_data.Y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, b)
            if not all(np.isfinite(g).all() for g in grads.values()):
                raise DivergenceError(epoch, b, "gradient")
            adam_step(params, grads, state, config.learning_rate, config.adam_beta1,
                      config.adam_beta2, config.adam_eps)
            total += loss * len(idx)
        history.train_loss.append(total / train_data.n)
        if val_data is not None:
            val = dataset_loss(model, val_data)
            history.val_loss.append(val)
            if config.early_stop_patience is not None:
                if val < best[0]:
                    best, stale = (val, clone(model)), 0
                else:
                    stale += 1
                    if stale >= config.early_stop_patience:
                        model = best[1]
                        history.stopped_epoch = epoch
                        break
    history.seconds = time.perf_counter() - start
    return model, history
