"""Dense float64 primitives and a per-batch reverse-mode tape.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Batched
inputs are row-major ``(B, features)``; a weight matrix is ``(out, in)`` so
that ``affine_forward(x, W, b) == W @ x + b`` for a single vector ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, EmptyBatchError, NumericError, ShapeError

ACTIVATIONS = ("relu", "sigmoid", "tanh")

# probabilities entering the cross-entropy are clamped into this interval
PROB_CLAMP = (1e-12, 1.0 - 1e-12)


def as_matrix(data, name="matrix", ndim=2) -> np.ndarray:
    """Convert to a finite float64 array with exactly ``ndim`` dimensions."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != ndim:
        raise ShapeError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise NumericError(f"{name} contains NaN or Inf")
    return arr


def _check_finite(*arrays):
    for a in arrays:
        if not np.isfinite(a).all():
            raise NumericError("non-finite input")


def glorot_uniform(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


# ---------------------------------------------------------------------------
# forward primitives

def _affine(x, W, b):
    return x @ W.T + b


def _relu(x):
    return np.maximum(x, 0.0)


def _sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ACT_FORWARD = {"relu": _relu, "sigmoid": _sigmoid, "tanh": np.tanh}


def _activate(x, kind):
    try:
        fn = _ACT_FORWARD[kind]
    except KeyError:
        raise ConfigError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}") from None
    return fn(x)


def _softmax(v):
    z = v - v.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def affine_forward(x, W, b) -> np.ndarray:
    """``W x + b`` for a vector ``x`` or row-wise for a batch ``(B, in)``."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if W.ndim != 2 or b.ndim != 1 or x.ndim not in (1, 2):
        raise ShapeError(f"bad ranks: x{x.shape}, W{W.shape}, b{b.shape}")
    if x.shape[-1] != W.shape[1] or b.shape[0] != W.shape[0]:
        raise ShapeError(f"dimension mismatch: x{x.shape}, W{W.shape}, b{b.shape}")
    _check_finite(x, W, b)
    return _affine(x, W, b)


def activation(x, kind: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x)
    return _activate(x, kind)


def activation_grad(x, kind: str) -> np.ndarray:
    """Elementwise derivative of ``activation(x, kind)`` with respect to ``x``."""
    x = np.asarray(x, dtype=np.float64)
    y = _activate(x, kind)
    if kind == "relu":
        return (x > 0).astype(np.float64)
    if kind == "sigmoid":
        return y * (1.0 - y)
    return 1.0 - y * y


def softmax_stable(v) -> np.ndarray:
    """Softmax along the last axis, shifted by the max so large inputs do not overflow."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim == 0 or v.shape[-1] == 0:
        raise ShapeError("softmax of an empty vector")
    _check_finite(v)
    return _softmax(v)


# ---------------------------------------------------------------------------
# tape

@dataclass
class Node:
    index: int
    op: str
    inputs: tuple
    value: np.ndarray
    attrs: dict = field(default_factory=dict)
    param: str | None = None

    @property
    def shape(self):
        return self.value.shape


def _mse_forward(pred, target):
    diff = pred - target
    return np.array((diff * diff).sum() / pred.shape[0])


def _xent_forward(prob, target):
    p = np.clip(prob, *PROB_CLAMP)
    return np.array(-(target * np.log(p)).sum() / prob.shape[0])


_FORWARD: dict[str, Callable] = {
    "affine": _affine,
    "act": lambda x, kind: _activate(x, kind),
    "softmax": _softmax,
    "mean_rows": lambda x: x.mean(axis=0),
    "scale": lambda x, c: x * c,
    "mul_rows": lambda x, m: x * m,
    "concat": lambda *xs: np.concatenate(xs, axis=1),
    "mse": _mse_forward,
    "xent": _xent_forward,
}


def _bw_affine(g, ins, out, **_):
    x, W, _b = ins
    return g @ W, g.T @ x, g.sum(axis=0)


def _bw_act(g, ins, out, kind):
    (x,) = ins
    if kind == "relu":
        return (g * (x > 0),)
    if kind == "sigmoid":
        return (g * out * (1.0 - out),)
    return (g * (1.0 - out * out),)


def _bw_softmax(g, ins, out, **_):
    return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)


def _bw_mean_rows(g, ins, out, **_):
    (x,) = ins
    return (np.broadcast_to(g / x.shape[0], x.shape).copy(),)


def _bw_scale(g, ins, out, c):
    return (g * c,)


def _bw_mul_rows(g, ins, out, **_):
    x, m = ins
    return g * m, (g * x).sum(axis=0)


def _bw_concat(g, ins, out, **_):
    grads, start = [], 0
    for x in ins:
        stop = start + x.shape[1]
        grads.append(g[:, start:stop])
        start = stop
    return tuple(grads)


def _bw_mse(g, ins, out, **_):
    pred, target = ins
    d = (2.0 * g / pred.shape[0]) * (pred - target)
    return d, -d


def _bw_xent(g, ins, out, **_):
    prob, target = ins
    lo, hi = PROB_CLAMP
    inside = (prob >= lo) & (prob <= hi)
    p = np.clip(prob, lo, hi)
    dp = -g * target / p / prob.shape[0] * inside
    return dp, np.zeros_like(target)


_BACKWARD: dict[str, Callable] = {
    "affine": _bw_affine,
    "act": _bw_act,
    "softmax": _bw_softmax,
    "mean_rows": _bw_mean_rows,
    "scale": _bw_scale,
    "mul_rows": _bw_mul_rows,
    "concat": _bw_concat,
    "mse": _bw_mse,
    "xent": _bw_xent,
}


class Tape:
    """Records one forward pass so gradients can be pulled back through it.

    A tape lives for a single batch. Leaves are either named parameters
    (``param``) or constants (``const``); every other node is produced by one
    of the primitive methods below and keeps its computed value.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def _push(self, op, inputs, value, attrs=None, param=None) -> Node:
        node = Node(len(self.nodes), op, tuple(n.index for n in inputs), value, attrs or {}, param)
        self.nodes.append(node)
        return node

    def _record(self, op, inputs, **attrs) -> Node:
        value = _FORWARD[op](*(n.value for n in inputs), **attrs)
        return self._push(op, inputs, value, attrs)

    def param(self, name: str, value: np.ndarray) -> Node:
        return self._push("param", (), value, param=name)

    def const(self, value) -> Node:
        return self._push("const", (), np.asarray(value, dtype=np.float64))

    def affine(self, x: Node, W: Node, b: Node) -> Node:
        if x.shape[-1] != W.shape[1] or b.shape[0] != W.shape[0]:
            raise ShapeError(f"affine mismatch: x{x.shape}, W{W.shape}, b{b.shape}")
        return self._record("affine", (x, W, b))

    def activation(self, x: Node, kind: str) -> Node:
        if kind not in _ACT_FORWARD:
            raise ConfigError(f"unknown activation {kind!r}")
        return self._record("act", (x,), kind=kind)

    def softmax(self, x: Node) -> Node:
        if x.value.size == 0:
            raise ShapeError("softmax of an empty vector")
        return self._record("softmax", (x,))

    def mean_rows(self, x: Node) -> Node:
        if x.shape[0] == 0:
            raise EmptyBatchError("mean over an empty batch")
        return self._record("mean_rows", (x,))

    def scale(self, x: Node, c: float) -> Node:
        return self._record("scale", (x,), c=float(c))

    def mul_rows(self, x: Node, m: Node) -> Node:
        if m.value.ndim != 1 or x.shape[-1] != m.shape[0]:
            raise ShapeError(f"cannot broadcast mask {m.shape} over rows of {x.shape}")
        return self._record("mul_rows", (x, m))

    def concat(self, *xs: Node) -> Node:
        rows = {x.shape[0] for x in xs}
        if len(rows) != 1:
            raise ShapeError(f"concat with different batch sizes {sorted(rows)}")
        return self._record("concat", xs)

    def mse(self, pred: Node, target: Node) -> Node:
        if pred.shape != target.shape:
            raise ShapeError(f"mse shapes differ: {pred.shape} vs {target.shape}")
        return self._record("mse", (pred, target))

    def cross_entropy(self, prob: Node, target: Node) -> Node:
        if prob.shape != target.shape:
            raise ShapeError(f"cross-entropy shapes differ: {prob.shape} vs {target.shape}")
        return self._record("xent", (prob, target))

    def replay(self) -> list[np.ndarray]:
        """Recompute every node from the recorded leaves; returns the values."""
        values: list[np.ndarray] = []
        for node in self.nodes:
            if node.op in ("param", "const"):
                values.append(node.value)
            else:
                values.append(_FORWARD[node.op](*(values[i] for i in node.inputs), **node.attrs))
        return values

    def backward(self, loss: Node) -> dict[str, np.ndarray]:
        """Gradient of the scalar ``loss`` for every parameter leaf on the tape.

        Parameters that do not feed into ``loss`` get a zero gradient.
        """
        if loss.value.size != 1:
            raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: list = [None] * len(self.nodes)
        grads[loss.index] = np.ones_like(loss.value)
        for node in reversed(self.nodes[: loss.index + 1]):
            g = grads[node.index]
            if g is None or not node.inputs:
                continue
            ins = [self.nodes[i].value for i in node.inputs]
            for i, gi in zip(node.inputs, _BACKWARD[node.op](g, ins, node.value, **node.attrs)):
                grads[i] = gi if grads[i] is None else grads[i] + gi
        out = {}
        for node in self.nodes:
            if node.param is not None:
                g = grads[node.index]
                g = np.zeros_like(node.value) if g is None else g
                out[node.param] = out[node.param] + g if node.param in out else g
        return out


def backward(tape: Tape, loss_node: Node) -> dict[str, np.ndarray]:
    return tape.backward(loss_node)


def finite_diff_check(loss_and_grad, params: dict[str, np.ndarray], eps: float = 1e-5) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    ``loss_and_grad(params)`` must return ``(loss, grads)`` where ``grads`` maps
    the same names as ``params``. Each parameter entry is perturbed in place by
    ``+-eps`` and restored afterwards. The relative error of one entry is
    ``|a - n| / max(1, |a|, |n|)``.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ConfigError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    _, analytic = loss_and_grad(params)
    worst = 0.0
    for name, p in params.items():
        a_grad = analytic[name]
        flat = p.reshape(-1)
        a_flat = np.asarray(a_grad, dtype=np.float64).reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = float(loss_and_grad(params)[0])
            flat[i] = orig - eps
            f_minus = float(loss_and_grad(params)[0])
            flat[i] = orig
            num = (f_plus - f_minus) / (2.0 * eps)
            a = a_flat[i]
            err = abs(a - num) / max(1.0, abs(a), abs(num))
            worst = max(worst, err)
    return worst
