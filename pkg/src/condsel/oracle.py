"""Exhaustive subset search: the ground-truth baseline for candidate selection.

Every size-k candidate subset is evaluated by training a fresh plain MLP on
the preselected columns plus that subset. Per-subset seeds are derived from
``(base_seed, subset)`` so results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, split, standardize
from .errors import ArgumentError, BudgetExceededError
from .model import MLP, higher_is_better, predict_metric
from .train import TrainConfig, train

DEFAULT_BUDGET = 10_000


@dataclass
class EvalConfig:
    """How a candidate subset is scored: split, evaluator width and training budget."""

    train: TrainConfig = field(default_factory=TrainConfig)
    test_fraction: float = 0.25
    split_seed: int = 0
    widths: tuple = (16, 32)

    def to_dict(self):
        return {"train": self.train.to_dict(), "test_fraction": self.test_fraction,
                "split_seed": self.split_seed, "widths": list(self.widths)}


@dataclass
class ComboRecord:
    indices: tuple
    metric: float
    seconds: float = 0.0


def enumerate_combinations(n: int, k: int):
    """All k-subsets of range(n) as ascending tuples, in lexicographic order."""
    if n < 0 or k < 0 or k > n:
        raise ArgumentError(f"need 0 <= k <= n, got n={n}, k={k}")
    return itertools.combinations(range(n), k)


def combination_seed(base_seed: int, indices) -> int:
    key = f"{int(base_seed)}:{','.join(str(int(i)) for i in indices)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def prepare(dataset: Dataset, cfg: EvalConfig):
    """Split with the evaluation seed and z-score both parts by training statistics."""
    train_d, test_d = split(dataset, cfg.test_fraction, cfg.split_seed)
    train_d, test_d, _ = standardize(train_d, test_d)
    return train_d, test_d


def evaluate_prepared(train_d: Dataset, test_d: Dataset, indices, cfg: EvalConfig) -> float:
    indices = tuple(int(i) for i in indices)
    if len(set(indices)) != len(indices) or not all(0 <= i < train_d.d_c for i in indices):
        raise ArgumentError(f"invalid candidate indices {indices} for {train_d.d_c} candidates")
    d_in = train_d.d_p + len(indices)
    if d_in == 0:
        raise ArgumentError("cannot evaluate an empty variable set")
    seed = combination_seed(cfg.train.seed, indices)
    tr = train_d.with_candidates(indices)
    te = test_d.with_candidates(indices)
    tcfg = replace(cfg.train, seed=seed, task=train_d.task, batch_size=min(cfg.train.batch_size, tr.n))
    model, _ = train(MLP.init(d_in, train_d.task, seed, cfg.widths), tr, tcfg)
    return predict_metric(model, te.Xp, te.Xc, te.Y)


def evaluate_subset(dataset: Dataset, candidate_indices, eval_config: EvalConfig) -> float:
    """Held-out metric of a fresh MLP trained on preselected + chosen candidates."""
    train_d, test_d = prepare(dataset, eval_config)
    return evaluate_prepared(train_d, test_d, candidate_indices, eval_config)


_WORKER = {}


def _worker_init(train_d, test_d, cfg):
    _WORKER.update(train=train_d, test=test_d, cfg=cfg)


def _timed_eval(indices, train_d=None, test_d=None, cfg=None):
    if train_d is None:
        train_d, test_d, cfg = _WORKER["train"], _WORKER["test"], _WORKER["cfg"]
    start = time.perf_counter()
    value = evaluate_prepared(train_d, test_d, indices, cfg)
    return ComboRecord(tuple(indices), value, time.perf_counter() - start)


def best_record(records, task) -> ComboRecord:
    """Best metric; ties go to the lexicographically smallest tuple."""
    sign = -1.0 if higher_is_better(task) else 1.0
    return min(records, key=lambda r: (sign * r.metric, r.indices))


def exhaustive_search(dataset: Dataset, k: int, eval_config: EvalConfig, budget: int = DEFAULT_BUDGET,
                      jobs: int = 1, prepared=None):
    """Evaluate every size-k candidate subset.

    Returns ``(best, records)`` with records in lexicographic order. Raises
    :class:`BudgetExceededError` before doing any work when C(d_c, k) exceeds
    ``budget``.
    """
    if not 0 <= k <= dataset.d_c:
        raise ArgumentError(f"k must lie in [0, {dataset.d_c}], got {k}")
    required = math.comb(dataset.d_c, k)
    if required > budget:
        raise BudgetExceededError(required, budget)
    train_d, test_d = prepared if prepared is not None else prepare(dataset, eval_config)
    combos = list(enumerate_combinations(dataset.d_c, k))
    if jobs > 1 and len(combos) > 1:
        with ProcessPoolExecutor(jobs, initializer=_worker_init, initargs=(train_d, test_d, eval_config)) as ex:
            records = list(ex.map(_timed_eval, combos))
    else:
        records = [_timed_eval(c, train_d, test_d, eval_config) for c in combos]
    records.sort(key=lambda r: r.indices)
    for r in records:
        if not np.isfinite(r.metric):
            raise ArgumentError(f"non-finite metric for combination {r.indices}")
    return best_record(records, dataset.task), records


def oracle_sweep(dataset: Dataset, ks, eval_config: EvalConfig, budget: int = DEFAULT_BUDGET, jobs: int = 1):
    """Best exhaustive metric for each total variable count K (preselected included)."""
    prepared = prepare(dataset, eval_config)
    out = []
    for K in sorted(ks):
        k = K - dataset.d_p
        if k < 0 or k > dataset.d_c:
            raise ArgumentError(f"K={K} outside [{dataset.d_p}, {dataset.d_p + dataset.d_c}]")
        best, _ = exhaustive_search(dataset, k, eval_config, budget, jobs, prepared)
        out.append((K, best.metric))
    return out


def write_audit_csv(records, candidates, path) -> None:
    """One row per combination: names joined by '|', the metric and training seconds."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["combination", "indices", "metric", "seconds"])
        for r in records:
            w.writerow(["|".join(candidates[i] for i in r.indices), " ".join(map(str, r.indices)),
                        repr(float(r.metric)), f"{r.seconds:.6f}"])


def read_audit_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return [ComboRecord(tuple(int(i) for i in row["indices"].split()), float(row["metric"]),
                            float(row["seconds"]))
                for row in csv.DictReader(fh)]
