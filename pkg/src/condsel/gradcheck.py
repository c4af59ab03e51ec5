"""Finite-difference check of the full conditional selection network."""

import numpy as np

from .model import CondSelModel, output_dim
from .numeric import Tape, finite_diff_check
from .train import loss_and_grads

# relu pre-activations closer to zero than this would let the +-eps stencil straddle the kink
KINK_MARGIN = 1e-4


def kink_distance(model, xp, xc) -> float:
    """Smallest |pre-activation| over every relu in one forward pass."""
    tape = Tape()
    model.record(tape, tape.const(xp), tape.const(xc))
    pre = [tape.nodes[n.inputs[0]].value for n in tape.nodes if n.op == "act"]
    return min(float(np.abs(v).min()) for v in pre)


def random_instance(d_p, d_c, task, batch, seed, margin=KINK_MARGIN, max_draws=1000):
    """A model with randomised mask net (so the softmax is non-uniform) and a random batch.

    The batch is redrawn until no relu input lies within ``margin`` of zero,
    since finite differences are meaningless across the kink.
    """
    rng = np.random.default_rng(seed)
    model = CondSelModel.init(d_p, d_c, task, seed=seed)
    model.fm.weight[...] = rng.normal(0.0, 0.5, model.fm.weight.shape)
    model.fm.bias[...] = rng.normal(0.0, 0.5, model.fm.bias.shape)
    for _, b in model.layers.values():
        b[...] = rng.normal(0.0, 0.1, b.shape)
    for _ in range(max_draws):
        xp = rng.standard_normal((batch, d_p))
        xc = rng.standard_normal((batch, d_c))
        if kink_distance(model, xp, xc) > margin:
            break
    if task == "classification":
        labels = rng.integers(0, 2, batch)
        Y = np.eye(output_dim(task))[labels]
    else:
        Y = rng.standard_normal((batch, 1))
    return model, xp, xc, Y


def gradcheck_condsel(d_p=1, d_c=10, task="regression", batch=8, seed=0, eps=1e-5) -> float:
    model, xp, xc, Y = random_instance(d_p, d_c, task, batch, seed)
    return finite_diff_check(lambda _: loss_and_grads(model, xp, xc, Y), model.parameters(), eps)
