"""Feature-mask generator over candidate variables.

Each sample produces a row of logits through one affine layer; the rows are
averaged over the batch (batch-wise attenuation), divided by a temperature and
pushed through a softmax. The resulting mask is positive, below one and sums
to one, so candidates compete for weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptyBatchError, ShapeError
from .numeric import Node, Tape


@dataclass
class FeatureMask:
    weight: np.ndarray  # (d_c, d_c)
    bias: np.ndarray  # (d_c,)
    temperature: float = 1.0

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        d_c = self.bias.shape[0] if self.bias.ndim == 1 else -1
        if d_c < 1 or self.weight.shape != (d_c, d_c):
            raise ShapeError(f"mask net must be (d_c, d_c) + (d_c,), got {self.weight.shape}, {self.bias.shape}")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")

    @classmethod
    def zeros(cls, d_c: int, temperature: float = 1.0) -> "FeatureMask":
        """Zero-initialised mask net, so the first mask is uniform."""
        return cls(np.zeros((d_c, d_c)), np.zeros(d_c), temperature)

    @property
    def d_c(self) -> int:
        return self.bias.shape[0]

    def parameters(self, prefix="fm.") -> dict[str, np.ndarray]:
        return {prefix + "weight": self.weight, prefix + "bias": self.bias}

    def record(self, tape: Tape, xc: Node, prefix="fm.") -> Node:
        """Append the mask computation for batch ``xc`` to ``tape``."""
        if xc.shape[0] == 0:
            raise EmptyBatchError("mask of an empty batch")
        if xc.shape[1] != self.d_c:
            raise ShapeError(f"batch has {xc.shape[1]} candidates, mask expects {self.d_c}")
        W = tape.param(prefix + "weight", self.weight)
        b = tape.param(prefix + "bias", self.bias)
        logits = tape.mean_rows(tape.affine(xc, W, b))
        if self.temperature != 1.0:
            logits = tape.scale(logits, 1.0 / self.temperature)
        return tape.softmax(logits)


def mask_forward(xc_batch, fm: FeatureMask) -> np.ndarray:
    xc = np.asarray(xc_batch, dtype=np.float64)
    if xc.ndim != 2:
        raise ShapeError(f"candidate batch must be 2-D, got shape {xc.shape}")
    tape = Tape()
    return fm.record(tape, tape.const(xc)).value


def apply_mask(xc, m) -> np.ndarray:
    xc = np.asarray(xc, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if xc.ndim != 2 or m.ndim != 1 or xc.shape[1] != m.shape[0]:
        raise ShapeError(f"cannot apply mask {m.shape} to {xc.shape}")
    return xc * m


def importance(train_xc, fm: FeatureMask) -> np.ndarray:
    """Final candidate importance: the mask computed on the whole training set."""
    return mask_forward(train_xc, fm)
