"""Synthetic datasets with known relevant variables.

Every generator is a pure function of its arguments: the same call returns
the same dataset. All generator equations live in this file.

open_defect
    Path delays measured at 12 supply voltages, 0.50 V to 1.05 V in 0.05 V
    steps. The nominal 0.9 V column is preselected; the other 11 are
    candidates. A fault-free delay follows an alpha-power law::

        base(v) = v / (v - vth) ** ALPHA,     vth = VTH + s * VTH_SIGMA * z_vth
        delay(v) = base(v) * (1 + s * PROC_SIGMA * z_proc) * (1 + s * MEAS_SIGMA * e_v)

    ``z_vth`` and ``z_proc`` are per-chip N(0, 1) process draws shared by all
    voltages, ``e_v`` is independent per-voltage measurement noise and ``s`` is
    the noise scale. A resistive open adds

        extra(v) = severity * base(v) * exp(-(v - 0.5) / DEFECT_DECAY)

    with ``severity ~ U(SEVERITY_LOW, SEVERITY_HIGH)``, so the defect shows up
    mostly at the lowest voltages. The nominal column tracks the process
    corner, which is why the low-voltage columns are most informative *given*
    0.9 V.

tuning
    Eleven variables c1..c4, t1..t7 with t2 preselected and regression
    target FoM::

        FoM = sin(1.5 t1) + 0.8 t2 t3 + 0.5 t3 + 0.6 (t4^2 - 1)
              + 0.8 tanh(1.5 t5) + 0.5 t2 + s * TUNING_NOISE * e

    t1..t5 are independent N(0, 1). The decoys share latent factors: c_i =
    0.8 u + 0.6 e_i, t6 = 0.7 c1 + 0.7 e, t7 = 0.6 t2 + 0.5 c2 + 0.6 e.
    Only t7 carries information about FoM, and only through t2.

planted
    Independent N(0, 1) columns. With relevant candidates R (in the order
    given) and preselected columns P::

        score = sum_{r in R} (sin(1.5 x_r) + 0.5 x_r)
                + sum_{p} (0.7 x_p + 0.3 x_p x_{R[p mod |R|]})
                + noise * e

    Regression returns ``score``; classification labels ``score > 0`` as the
    positive class.
"""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import ArgumentError

VOLTAGES = tuple(round(0.50 + 0.05 * i, 2) for i in range(12))
NOMINAL_VOLTAGE = 0.9
ALPHA = 1.3
VTH = 0.3
VTH_SIGMA = 0.01
PROC_SIGMA = 0.08
MEAS_SIGMA = 0.01
DEFECT_DECAY = 0.1
SEVERITY_LOW, SEVERITY_HIGH = 0.1, 0.3

TUNING_NOISE = 0.05
TUNING_NAMES = ("c1", "c2", "c3", "c4", "t1", "t2", "t3", "t4", "t5", "t6", "t7")
TUNING_PRESELECTED = "t2"
TUNING_RELEVANT = ("t1", "t3", "t4", "t5")


def voltage_name(v: float) -> str:
    return f"{v:g}V"


def _alpha_power(v, vth):
    return v / (v - vth) ** ALPHA


def gen_open_defect(n_defective=1000, n_ok=1000, seed=0, noise_scale=1.0) -> Dataset:
    if n_defective < 1 or n_ok < 1:
        raise ArgumentError("both class counts must be >= 1")
    rng = np.random.default_rng(seed)
    n = n_defective + n_ok
    v = np.array(VOLTAGES)
    defective = np.zeros(n, dtype=bool)
    defective[rng.permutation(n)[:n_defective]] = True
    vth = VTH + noise_scale * VTH_SIGMA * rng.standard_normal((n, 1))
    proc = 1.0 + noise_scale * PROC_SIGMA * rng.standard_normal((n, 1))
    meas = 1.0 + noise_scale * MEAS_SIGMA * rng.standard_normal((n, v.size))
    severity = rng.uniform(SEVERITY_LOW, SEVERITY_HIGH, size=(n, 1)) * defective[:, None]
    base = _alpha_power(v[None, :], vth)
    delay = (base + severity * base * np.exp(-(v - 0.5) / DEFECT_DECAY)) * proc * meas

    nominal = VOLTAGES.index(NOMINAL_VOLTAGE)
    cand = [i for i in range(v.size) if i != nominal]
    Y = np.stack([~defective, defective], axis=1).astype(np.float64)
    return Dataset(
        delay[:, [nominal]], delay[:, cand], Y,
        (voltage_name(NOMINAL_VOLTAGE),), tuple(voltage_name(VOLTAGES[i]) for i in cand),
        "label", "classification", ("ok", "defect"),
        layout=(*(voltage_name(x) for x in VOLTAGES), "label"),
    )


def tuning_fom(t1, t2, t3, t4, t5):
    return (np.sin(1.5 * t1) + 0.8 * t2 * t3 + 0.5 * t3 + 0.6 * (t4 ** 2 - 1.0)
            + 0.8 * np.tanh(1.5 * t5) + 0.5 * t2)


def gen_tuning(n=5000, seed=0, noise_scale=1.0) -> Dataset:
    if n < 1:
        raise ArgumentError("n must be >= 1")
    rng = np.random.default_rng(seed)
    t = {f"t{i}": rng.standard_normal(n) for i in range(1, 6)}
    u = rng.standard_normal(n)
    cols = {f"c{i}": 0.8 * u + 0.6 * rng.standard_normal(n) for i in range(1, 5)}
    cols.update(t)
    cols["t6"] = 0.7 * cols["c1"] + 0.7 * rng.standard_normal(n)
    cols["t7"] = 0.6 * t["t2"] + 0.5 * cols["c2"] + 0.6 * rng.standard_normal(n)
    fom = tuning_fom(t["t1"], t["t2"], t["t3"], t["t4"], t["t5"])
    fom = fom + noise_scale * TUNING_NOISE * rng.standard_normal(n)
    cand = tuple(c for c in TUNING_NAMES if c != TUNING_PRESELECTED)
    return Dataset(
        cols[TUNING_PRESELECTED][:, None], np.stack([cols[c] for c in cand], axis=1), fom[:, None],
        (TUNING_PRESELECTED,), cand, "FoM", "regression", layout=(*TUNING_NAMES, "FoM"),
    )


def tuning_relevant_indices(dataset: Dataset) -> tuple:
    return tuple(dataset.candidates.index(c) for c in TUNING_RELEVANT)


def planted_score(xp, xc, relevant):
    relevant = list(relevant)
    s = sum(np.sin(1.5 * xc[:, r]) + 0.5 * xc[:, r] for r in relevant)
    for p in range(xp.shape[1]):
        s = s + 0.7 * xp[:, p] + 0.3 * xp[:, p] * xc[:, relevant[p % len(relevant)]]
    return s


def gen_planted(n=5000, d_c=6, d_p=1, relevant=(0, 3), task="regression", seed=0, noise=0.1) -> Dataset:
    relevant = tuple(int(r) for r in relevant)
    if not relevant:
        raise ArgumentError("relevant set must not be empty")
    if n < 1 or d_c < 1 or d_p < 0:
        raise ArgumentError("need n >= 1, d_c >= 1, d_p >= 0")
    if len(set(relevant)) != len(relevant) or not all(0 <= r < d_c for r in relevant):
        raise ArgumentError(f"relevant indices {relevant} must be distinct and within [0, {d_c})")
    rng = np.random.default_rng(seed)
    xp = rng.standard_normal((n, d_p))
    xc = rng.standard_normal((n, d_c))
    score = planted_score(xp, xc, relevant) + noise * rng.standard_normal(n)
    if task == "classification":
        pos = score > 0
        Y = np.stack([~pos, pos], axis=1).astype(np.float64)
        classes = ("neg", "pos")
    elif task == "regression":
        Y = score[:, None]
        classes = ("0", "1")
    else:
        raise ArgumentError(f"unknown task {task!r}")
    return Dataset(xp, xc, Y, tuple(f"p{i}" for i in range(d_p)), tuple(f"x{i}" for i in range(d_c)),
                   "y", task, classes)
