"""Datasets split into preselected / candidate / target blocks, plus CSV I/O.

CSV files have a header row, comma separators, dot decimals and UTF-8
encoding. A JSON manifest assigns each column a role::

    {"columns": {"0.9V": "preselected", "0.5V": "candidate", "label": "target"},
     "task": "classification", "positive_class": "defect"}
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IngestionError, LabelError, ShapeError, StratificationError
from .model import output_dim

ROLES = ("preselected", "candidate", "target", "ignore")
STD_FLOOR = 1e-8


@dataclass
class Dataset:
    Xp: np.ndarray
    Xc: np.ndarray
    Y: np.ndarray
    preselected: tuple
    candidates: tuple
    target: str
    task: str
    classes: tuple = ("0", "1")  # (negative, positive) labels for classification
    layout: tuple = ()  # CSV column order; defaults to preselected + candidates + target

    def __post_init__(self):
        self.Y = np.asarray(self.Y, dtype=np.float64)
        self.Xp = np.asarray(self.Xp, dtype=np.float64)
        if self.Xp.size == 0:
            self.Xp = self.Xp.reshape(self.Y.shape[0], 0)
        self.Xc = np.asarray(self.Xc, dtype=np.float64)
        self.preselected = tuple(self.preselected)
        self.candidates = tuple(self.candidates)
        if not self.layout:
            self.layout = (*self.preselected, *self.candidates, self.target)
        self.layout = tuple(self.layout)
        n = self.Y.shape[0]
        if self.Xp.shape != (n, len(self.preselected)) or self.Xc.shape != (n, len(self.candidates)):
            raise ShapeError(
                f"blocks disagree: Xp{self.Xp.shape}, Xc{self.Xc.shape}, Y{self.Y.shape} "
                f"for {len(self.preselected)} preselected / {len(self.candidates)} candidates"
            )
        if self.Y.ndim != 2 or self.Y.shape[1] != output_dim(self.task):
            raise ShapeError(f"target block {self.Y.shape} does not fit task {self.task}")
        names = (*self.preselected, *self.candidates, self.target)
        if len(set(names)) != len(names):
            raise ShapeError("column names must be unique")
        if sorted(self.layout) != sorted(names):
            raise ShapeError("layout must list every column exactly once")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def d_p(self) -> int:
        return self.Xp.shape[1]

    @property
    def d_c(self) -> int:
        return self.Xc.shape[1]

    def rows(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return replace(self, Xp=self.Xp[idx], Xc=self.Xc[idx], Y=self.Y[idx])

    def with_candidates(self, idx) -> "Dataset":
        """Keep only the candidate columns at ``idx`` (in that order)."""
        idx = [int(i) for i in idx]
        names = tuple(self.candidates[i] for i in idx)
        dropped = set(self.candidates) - set(names)
        layout = tuple(c for c in self.layout if c not in dropped)
        return replace(self, Xc=self.Xc[:, idx], candidates=names, layout=layout)

    def labels(self) -> np.ndarray:
        """Class index per row (classification only)."""
        return self.Y.argmax(axis=1)


@dataclass
class ColumnManifest:
    columns: dict
    task: str
    positive_class: str | None = None

    def __post_init__(self):
        output_dim(self.task)
        bad = {r for r in self.columns.values() if r not in ROLES}
        if bad:
            raise IngestionError(f"unknown column roles {sorted(bad)}; expected {ROLES}")
        roles = list(self.columns.values())
        if roles.count("candidate") < 1:
            raise IngestionError("manifest must mark at least one candidate column")
        if roles.count("target") != 1:
            raise IngestionError(f"manifest must mark exactly one target column, found {roles.count('target')}")
        if self.task == "classification" and self.positive_class is None:
            raise IngestionError("classification manifest needs positive_class")

    def names(self, role):
        return [c for c, r in self.columns.items() if r == role]

    def to_dict(self):
        return {"columns": dict(self.columns), "task": self.task, "positive_class": self.positive_class}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(dict(d["columns"]), d["task"], d.get("positive_class"))
        except KeyError as exc:
            raise IngestionError(f"manifest missing field {exc}") from None

    @classmethod
    def read(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def manifest_for(dataset: Dataset) -> ColumnManifest:
    roles = {**{c: "preselected" for c in dataset.preselected},
             **{c: "candidate" for c in dataset.candidates},
             dataset.target: "target"}
    columns = {c: roles[c] for c in dataset.layout}
    positive = dataset.classes[1] if dataset.task == "classification" else None
    return ColumnManifest(columns, dataset.task, positive)


def _parse(cell, row, col):
    try:
        value = float(cell)
    except ValueError:
        raise IngestionError(f"row {row}, column {col!r}: cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise IngestionError(f"row {row}, column {col!r}: non-finite value {cell!r}")
    return value


def load_csv(path, manifest: ColumnManifest) -> Dataset:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path} is empty") from None
        body = [r for r in reader if r]
    missing = [c for c in manifest.columns if c not in header]
    if missing:
        raise IngestionError(f"columns {missing} not found in {path}")
    if not body:
        raise IngestionError(f"{path} has no data rows")
    pos = {c: header.index(c) for c in manifest.columns}
    pre, cand = manifest.names("preselected"), manifest.names("candidate")
    (target,) = manifest.names("target")

    def block(names):
        out = np.empty((len(body), len(names)))
        for i, r in enumerate(body, start=2):
            if len(r) != len(header):
                raise IngestionError(f"row {i}: expected {len(header)} cells, got {len(r)}")
            for j, c in enumerate(names):
                out[i - 2, j] = _parse(r[pos[c]], i, c)
        return out

    raw_target = [r[pos[target]] for r in body]
    if manifest.task == "classification":
        positive = str(manifest.positive_class)
        values = sorted(set(raw_target))
        others = [v for v in values if v != positive]
        if len(others) > 1:
            raise LabelError(f"target {target!r} has more than two classes: {values}")
        negative = others[0] if others else "not_" + positive
        is_pos = np.array([v == positive for v in raw_target], dtype=np.float64)
        Y = np.stack([1.0 - is_pos, is_pos], axis=1)
        classes = (negative, positive)
    else:
        Y = np.array([[_parse(v, i, target)] for i, v in enumerate(raw_target, start=2)])
        classes = ("0", "1")
    layout = tuple(c for c in header if c in manifest.columns and manifest.columns[c] != "ignore")
    return Dataset(block(pre), block(cand), Y, pre, cand, target, manifest.task, classes, layout)


def _fmt(x):
    return format(float(x), ".17g")


def write_csv(dataset: Dataset, path) -> None:
    """Write with 17 significant digits so values survive the round trip exactly."""
    cols = {c: dataset.Xp[:, j] for j, c in enumerate(dataset.preselected)}
    cols.update({c: dataset.Xc[:, j] for j, c in enumerate(dataset.candidates)})
    if dataset.task == "classification":
        target_cells = [dataset.classes[k] for k in dataset.labels()]
    else:
        target_cells = [_fmt(v) for v in dataset.Y[:, 0]]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(dataset.layout)
        for i in range(dataset.n):
            w.writerow([target_cells[i] if c == dataset.target else _fmt(cols[c][i]) for c in dataset.layout])


def split(dataset: Dataset, test_fraction: float, seed: int):
    """Seeded shuffle-and-partition; stratified by class for classification.

    Row order inside each part is ascending original index.
    """
    if not 0.0 < test_fraction < 1.0:
        raise StratificationError(f"test_fraction must be in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    if dataset.task == "classification":
        labels = dataset.labels()
        groups = [np.flatnonzero(labels == k) for k in (0, 1)]
        groups = [g for g in groups if g.size]
    else:
        groups = [np.arange(dataset.n)]
    train_idx, test_idx = [], []
    for g in groups:
        g = rng.permutation(g)
        n_test = int(round(test_fraction * g.size))
        if n_test == 0 or n_test == g.size:
            raise StratificationError(
                f"test fraction {test_fraction} leaves a group of {g.size} rows empty on one side"
            )
        test_idx.append(g[:n_test])
        train_idx.append(g[n_test:])
    return dataset.rows(np.sort(np.concatenate(train_idx))), dataset.rows(np.sort(np.concatenate(test_idx)))


@dataclass
class Standardizer:
    xp_mean: np.ndarray
    xp_std: np.ndarray
    xc_mean: np.ndarray
    xc_std: np.ndarray
    y_mean: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_std: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def fit(cls, train: Dataset) -> "Standardizer":
        def stats(a):
            return a.mean(axis=0), np.maximum(a.std(axis=0), STD_FLOOR)

        xp_m, xp_s = stats(train.Xp)
        xc_m, xc_s = stats(train.Xc)
        if train.task == "regression":
            y_m, y_s = stats(train.Y)
            return cls(xp_m, xp_s, xc_m, xc_s, y_m, y_s)
        return cls(xp_m, xp_s, xc_m, xc_s)

    def transform(self, d: Dataset) -> Dataset:
        Y = (d.Y - self.y_mean) / self.y_std if d.task == "regression" else d.Y
        return replace(d, Xp=(d.Xp - self.xp_mean) / self.xp_std, Xc=(d.Xc - self.xc_mean) / self.xc_std, Y=Y)

    def inverse_target(self, y) -> np.ndarray:
        return np.asarray(y) * self.y_std + self.y_mean if self.y_std.size else np.asarray(y)


def standardize(train: Dataset, test: Dataset):
    scaler = Standardizer.fit(train)
    return scaler.transform(train), scaler.transform(test), scaler
