"""From learned importance to ranked subsets, subset-size sweeps and reports."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, standardize, split
from .errors import ArgumentError
from .mask import importance as mask_importance
from .model import CondSelModel
from .oracle import EvalConfig, evaluate_prepared, prepare
from .train import TrainConfig, TrainHistory, train


def select_top_k(importance, k: int) -> list[int]:
    """Indices of the k largest scores, descending; equal scores keep the lower index first."""
    importance = np.asarray(importance, dtype=np.float64)
    if not 1 <= k <= importance.size:
        raise ArgumentError(f"k must lie in [1, {importance.size}], got {k}")
    return [int(i) for i in np.argsort(-importance, kind="stable")[:k]]


def rank(importance) -> list[int]:
    return select_top_k(importance, len(importance))


@dataclass
class SelectionReport:
    candidates: list
    preselected: list
    importance: list
    ranking: list = field(default_factory=list)
    chosen: list = field(default_factory=list)
    sweep: list | None = None  # [(K, metric)]
    oracle: dict | None = None
    timings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.importance = [float(x) for x in self.importance]
        if not self.ranking:
            self.ranking = rank(self.importance)
        if sorted(self.ranking) != list(range(len(self.importance))):
            raise ArgumentError("ranking must be a permutation of the candidate indices")
        if list(self.chosen) != list(self.ranking[:len(self.chosen)]):
            raise ArgumentError("chosen must be a prefix of the ranking")
        if self.sweep is not None:
            self.sweep = [(int(K), float(v)) for K, v in self.sweep]
            ks = [K for K, _ in self.sweep]
            if any(b <= a for a, b in zip(ks, ks[1:])):
                raise ArgumentError("sweep K values must be strictly increasing")

    def to_dict(self, include_timings=True) -> dict:
        d = {
            "candidates": list(self.candidates),
            "preselected": list(self.preselected),
            "importance": self.importance,
            "ranking": list(self.ranking),
            "chosen": list(self.chosen),
            "chosen_names": [self.candidates[i] for i in self.chosen],
            "sweep": None if self.sweep is None else [[K, v] for K, v in self.sweep],
            "oracle": self.oracle,
        }
        if include_timings:
            d["timings"] = dict(self.timings)
        return d

    def to_json(self, include_timings=True) -> str:
        return json.dumps(self.to_dict(include_timings), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d) -> "SelectionReport":
        sweep = d.get("sweep")
        return cls(d["candidates"], d["preselected"], d["importance"], d["ranking"], d["chosen"],
                   None if sweep is None else [tuple(s) for s in sweep], d.get("oracle"),
                   d.get("timings", {}))

    @classmethod
    def from_json(cls, text) -> "SelectionReport":
        return cls.from_dict(json.loads(text))

    def write(self, path, include_timings=True):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json(include_timings))

    @classmethod
    def read(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())


@dataclass
class FMResult:
    model: CondSelModel
    importance: np.ndarray
    history: TrainHistory
    seconds: float


def fm_select(train_d: Dataset, config: TrainConfig, enc_width=16, head_width=32) -> FMResult:
    """Train the conditional selection network once and read off candidate importance.

    ``train_d`` should already be standardized. Importance is the mask computed
    on the full training set.
    """
    start = time.perf_counter()
    config = replace(config, task=train_d.task)
    model = CondSelModel.init(train_d.d_p, train_d.d_c, train_d.task, config.seed, enc_width, head_width,
                              config.temperature)
    model, history = train(model, train_d, replace(config, batch_size=min(config.batch_size, train_d.n)))
    scores = mask_importance(train_d.Xc, model.fm)
    return FMResult(model, scores, history, time.perf_counter() - start)


def select(dataset: Dataset, config: TrainConfig, k=None, test_fraction=0.25, split_seed=0) -> tuple:
    """Split, standardize, train and report. Returns ``(report, fm_result)``."""
    train_d, test_d = split(dataset, test_fraction, split_seed)
    train_d, _, _ = standardize(train_d, test_d)
    result = fm_select(train_d, config)
    chosen = select_top_k(result.importance, k) if k else []
    report = SelectionReport(list(dataset.candidates), list(dataset.preselected), result.importance,
                             chosen=chosen, timings={"fm_train": result.seconds})
    return report, result


def sweep_subset(importance, K: int, d_p: int) -> tuple:
    """Candidate indices (ascending) used at total size K: the top K - d_p by importance."""
    k = K - d_p
    if k < 0 or k > len(importance):
        raise ArgumentError(f"K={K} outside [{d_p}, {d_p + len(importance)}]; preselected variables cannot be dropped")
    return tuple(sorted(select_top_k(importance, k))) if k else ()


def subset_sweep(dataset: Dataset, importance, Ks, eval_config: EvalConfig, prepared=None) -> list:
    """Held-out metric of a fresh MLP on preselected + top (K - d_p) candidates for each K."""
    Ks = sorted(int(K) for K in Ks)
    if len(set(Ks)) != len(Ks):
        raise ArgumentError("duplicate K values")
    subsets = [sweep_subset(importance, K, dataset.d_p) for K in Ks]
    train_d, test_d = prepared if prepared is not None else prepare(dataset, eval_config)
    return [(K, evaluate_prepared(train_d, test_d, s, eval_config)) for K, s in zip(Ks, subsets)]


def compare_with_oracle(sweep_fm, sweep_exhaustive) -> list:
    """Per-K ``(K, metric_fm, metric_oracle, metric_fm - metric_oracle)``."""
    fm = dict(sweep_fm)
    ex = dict(sweep_exhaustive)
    if sorted(fm) != sorted(ex) or len(fm) != len(sweep_fm) or len(ex) != len(sweep_exhaustive):
        raise ArgumentError(f"sweeps cover different K values: {sorted(fm)} vs {sorted(ex)}")
    return [(K, fm[K], ex[K], fm[K] - ex[K]) for K in sorted(fm)]


def write_importance_csv(report: SelectionReport, path) -> None:
    """Rows in candidate order: name, importance, 1-based rank."""
    ranks = {i: r + 1 for r, i in enumerate(report.ranking)}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["candidate_name", "importance", "rank"])
        for i, name in enumerate(report.candidates):
            w.writerow([name, repr(report.importance[i]), ranks[i]])


def write_sweep_csv(rows, path) -> None:
    """``(K, metric)`` rows, or the four-column comparison from :func:`compare_with_oracle`."""
    header = ["K", "metric"] if len(rows[0]) == 2 else ["K", "metric_fm", "metric_oracle", "gap"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([row[0], *(repr(float(x)) for x in row[1:])])


def read_sweep_csv(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    return [(int(r[0]), *(float(x) for x in r[1:])) for r in rows]
