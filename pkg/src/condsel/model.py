"""Conditional selection network and the plain MLP used to evaluate subsets.

Both models expose the same small surface the trainer relies on:
``parameters()``, ``record(tape, xp, xc)`` and ``task``.
"""

from __future__ import annotations

import copy
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyBatchError, LabelError, ShapeError
from .mask import FeatureMask
from .numeric import Node, Tape, glorot_uniform

TASKS = ("regression", "classification")


def output_dim(task: str) -> int:
    if task == "regression":
        return 1
    if task == "classification":
        return 2
    raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")


def _init_layer(rng, fan_in, fan_out):
    return glorot_uniform(rng, fan_out, fan_in), np.zeros(fan_out)


def _dense(tape, layers, name, x, act=None):
    W, b = layers[name]
    h = tape.affine(x, tape.param(name + ".weight", W), tape.param(name + ".bias", b))
    return tape.activation(h, act) if act else h


def _check_layers(layers, chain):
    for name, fan_in, fan_out in chain:
        W, b = layers[name]
        if W.shape != (fan_out, fan_in) or b.shape != (fan_out,):
            raise ShapeError(
                f"layer {name}: expected W{(fan_out, fan_in)}, b{(fan_out,)}, got W{W.shape}, b{b.shape}"
            )


@dataclass
class CondSelModel:
    """Mask + two encoders + fusion head.

    ``f_p`` encodes the preselected columns, ``f_c`` encodes the masked
    candidates; their outputs are concatenated and fed to a two-layer head.
    With ``d_p == 0`` the preselected branch is dropped entirely.
    """

    d_p: int
    d_c: int
    task: str
    fm: FeatureMask
    layers: dict = field(default_factory=dict)  # name -> (W, b)
    enc_width: int = 16
    head_width: int = 32
    activation: str = "relu"

    def __post_init__(self):
        self.d_y = output_dim(self.task)
        if self.d_c < 1 or self.d_p < 0:
            raise ShapeError(f"need d_c >= 1 and d_p >= 0, got d_c={self.d_c}, d_p={self.d_p}")
        if self.fm.d_c != self.d_c:
            raise ShapeError(f"mask covers {self.fm.d_c} candidates, model has {self.d_c}")
        expected = {"fc", "g1", "g2"} | ({"fp"} if self.d_p else set())
        if set(self.layers) != expected:
            raise ShapeError(f"layers {sorted(self.layers)} do not match {sorted(expected)}")
        _check_layers(self.layers, self._chain())

    def _chain(self):
        fused = self.enc_width * (2 if self.d_p else 1)
        chain = [("fc", self.d_c, self.enc_width), ("g1", fused, self.head_width),
                 ("g2", self.head_width, self.d_y)]
        if self.d_p:
            chain.insert(0, ("fp", self.d_p, self.enc_width))
        return chain

    @classmethod
    def init(cls, d_p, d_c, task, seed=0, enc_width=16, head_width=32, temperature=1.0):
        rng = np.random.default_rng(seed)
        d_y = output_dim(task)
        layers = {}
        if d_p:
            layers["fp"] = _init_layer(rng, d_p, enc_width)
        layers["fc"] = _init_layer(rng, d_c, enc_width)
        layers["g1"] = _init_layer(rng, enc_width * (2 if d_p else 1), head_width)
        layers["g2"] = _init_layer(rng, head_width, d_y)
        return cls(d_p, d_c, task, FeatureMask.zeros(d_c, temperature), layers, enc_width, head_width)

    def parameters(self) -> dict[str, np.ndarray]:
        params = self.fm.parameters()
        for name, (W, b) in self.layers.items():
            params[name + ".weight"] = W
            params[name + ".bias"] = b
        return params

    def record(self, tape: Tape, xp: Node, xc: Node) -> Node:
        if xc.shape[0] != xp.shape[0]:
            raise ShapeError(f"batch sizes differ: Xp has {xp.shape[0]} rows, Xc has {xc.shape[0]}")
        if xp.shape[1] != self.d_p or xc.shape[1] != self.d_c:
            raise ShapeError(f"expected {self.d_p}+{self.d_c} columns, got {xp.shape[1]}+{xc.shape[1]}")
        m = self.fm.record(tape, xc)
        hc = _dense(tape, self.layers, "fc", tape.mul_rows(xc, m), self.activation)
        if self.d_p:
            hp = _dense(tape, self.layers, "fp", xp, self.activation)
            h = tape.concat(hp, hc)
        else:
            h = hc
        out = _dense(tape, self.layers, "g2", _dense(tape, self.layers, "g1", h, self.activation))
        return tape.softmax(out) if self.task == "classification" else out

    def describe(self) -> dict:
        return {"kind": "condsel", "d_p": self.d_p, "d_c": self.d_c, "d_y": self.d_y, "task": self.task,
                "enc_width": self.enc_width, "head_width": self.head_width,
                "activation": self.activation, "temperature": self.fm.temperature}


@dataclass
class MLP:
    """Plain feed-forward net on ``[Xp | Xc]``: hidden relu layers then an output layer."""

    d_in: int
    task: str
    layers: dict = field(default_factory=dict)
    widths: tuple = (16, 32)
    activation: str = "relu"

    def __post_init__(self):
        self.d_y = output_dim(self.task)
        if self.d_in < 1:
            raise ShapeError("MLP needs at least one input column")
        self.widths = tuple(self.widths)
        dims = (self.d_in, *self.widths, self.d_y)
        chain = [(f"h{i}", dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
        if set(self.layers) != {c[0] for c in chain}:
            raise ShapeError(f"layers {sorted(self.layers)} do not match the widths {self.widths}")
        _check_layers(self.layers, chain)

    @classmethod
    def init(cls, d_in, task, seed=0, widths=(16, 32)):
        rng = np.random.default_rng(seed)
        dims = (d_in, *widths, output_dim(task))
        layers = {f"h{i}": _init_layer(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)}
        return cls(d_in, task, layers, tuple(widths))

    def parameters(self) -> dict[str, np.ndarray]:
        params = {}
        for name, (W, b) in self.layers.items():
            params[name + ".weight"] = W
            params[name + ".bias"] = b
        return params

    def record(self, tape: Tape, xp: Node, xc: Node) -> Node:
        parts = [x for x in (xp, xc) if x.shape[1] > 0]
        if not parts:
            raise ShapeError("MLP called with no input columns")
        h = parts[0] if len(parts) == 1 else tape.concat(*parts)
        if h.shape[1] != self.d_in:
            raise ShapeError(f"MLP expects {self.d_in} columns, got {h.shape[1]}")
        n = len(self.layers)
        for i in range(n):
            h = _dense(tape, self.layers, f"h{i}", h, self.activation if i < n - 1 else None)
        return tape.softmax(h) if self.task == "classification" else h

    def describe(self) -> dict:
        return {"kind": "mlp", "d_in": self.d_in, "d_y": self.d_y, "task": self.task,
                "widths": list(self.widths), "activation": self.activation}


# ---------------------------------------------------------------------------

def forward(xp, xc, model) -> np.ndarray:
    """Predictions for a batch: ``(B, 1)`` for regression, probability rows for classification."""
    tape = Tape()
    return model.record(tape, tape.const(np.asarray(xp, dtype=np.float64)),
                        tape.const(np.asarray(xc, dtype=np.float64))).value


def check_labels(Y, task):
    Y = np.asarray(Y, dtype=np.float64)
    if task == "classification":
        onehot = Y.ndim == 2 and Y.shape[1] == 2 and np.isin(Y, (0.0, 1.0)).all() and (Y.sum(axis=1) == 1).all()
        if not onehot:
            raise LabelError("classification targets must be one-hot rows of width 2")
    return Y


def record_loss(tape: Tape, pred: Node, Y, task) -> Node:
    target = tape.const(Y)
    if task == "classification":
        return tape.cross_entropy(pred, target)
    return tape.mse(pred, target)


def loss(pred, Y, task) -> float:
    """MSE (regression) or mean cross-entropy over one-hot rows (classification)."""
    pred = np.asarray(pred, dtype=np.float64)
    Y = check_labels(Y, task)
    if pred.shape != Y.shape:
        raise ShapeError(f"prediction {pred.shape} and target {Y.shape} differ")
    tape = Tape()
    return float(record_loss(tape, tape.const(pred), Y, task).value)


def metric(pred, Y, task) -> float:
    """Accuracy for classification (argmax ties go to class 0), MSE for regression."""
    pred = np.asarray(pred, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if pred.shape[0] == 0:
        raise EmptyBatchError("metric of an empty evaluation set")
    if task == "classification":
        return float(np.mean(pred.argmax(axis=1) == Y.argmax(axis=1)))
    return float(np.mean(np.sum((pred - Y) ** 2, axis=1)))


def predict_metric(model, xp, xc, Y) -> float:
    return metric(forward(xp, xc, model), Y, model.task)


def higher_is_better(task) -> bool:
    return task == "classification"


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_MAGIC = b"CSELCKPT"
CHECKPOINT_VERSION = 1


def save_checkpoint(model, path) -> None:
    """Write ``model`` as magic, u32 version, u32 header length, JSON header, raw '<f8' arrays."""
    arrays, offset = [], 0
    params = model.parameters()
    for name, arr in params.items():
        arrays.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = json.dumps({"model": model.describe(), "dtype": "<f8", "arrays": arrays}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        fh.write(header)
        for arr in params.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ConfigError(f"{path} is not a condsel checkpoint")
    version, hlen = struct.unpack("<II", blob[8:16])
    if version != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    base = 16 + hlen
    params = {}
    for a in header["arrays"]:
        count = int(np.prod(a["shape"], dtype=np.int64))
        start = base + a["offset"]
        params[a["name"]] = np.frombuffer(blob[start:start + 8 * count], dtype="<f8").reshape(a["shape"]).astype(np.float64)
    desc = header["model"]

    def pairs(names):
        return {n: (params[n + ".weight"], params[n + ".bias"]) for n in names}

    if desc["kind"] == "condsel":
        names = [n for n in ("fp", "fc", "g1", "g2") if n + ".weight" in params]
        fm = FeatureMask(params["fm.weight"], params["fm.bias"], desc["temperature"])
        return CondSelModel(desc["d_p"], desc["d_c"], desc["task"], fm, pairs(names),
                            desc["enc_width"], desc["head_width"], desc["activation"])
    if desc["kind"] == "mlp":
        names = [f"h{i}" for i in range(len(desc["widths"]) + 1)]
        return MLP(desc["d_in"], desc["task"], pairs(names), tuple(desc["widths"]), desc["activation"])
    raise ConfigError(f"unknown model kind {desc['kind']!r}")


def clone(model):
    return copy.deepcopy(model)
