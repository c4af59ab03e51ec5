import json
import statistics

import numpy as np
import pytest

from condsel.data import ColumnManifest, Dataset, load_csv, manifest_for, split, standardize, write_csv
from condsel.errors import ArgumentError, IngestionError, LabelError, StratificationError
from condsel.generators import (NOMINAL_VOLTAGE, VOLTAGES, gen_open_defect, gen_planted, gen_tuning,
                                tuning_fom, tuning_relevant_indices)


def write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_routes_columns(tmp_path):
    path = write(tmp_path, "p,c1,c2,y\n1,2,3,4\n5,6,7,8\n9,10,11,12\n")
    m = ColumnManifest({"p": "preselected", "c1": "candidate", "c2": "candidate", "y": "target"}, "regression")
    d = load_csv(path, m)
    assert (d.n, d.d_p, d.d_c) == (3, 1, 2)
    np.testing.assert_array_equal(d.Xc[:, 1], [3, 7, 11])
    np.testing.assert_array_equal(d.Y[:, 0], [4, 8, 12])


def test_one_hot_positive_class(tmp_path):
    path = write(tmp_path, "a,b,status\n1,2,ok\n3,4,defect\n5,6,ok\n")
    m = ColumnManifest({"a": "preselected", "b": "candidate", "status": "target"}, "classification", "defect")
    d = load_csv(path, m)
    np.testing.assert_array_equal(d.Y, [[1, 0], [0, 1], [1, 0]])
    assert d.classes == ("ok", "defect")


def test_ignore_columns_are_dropped(tmp_path):
    path = write(tmp_path, "id,a,b,y\nx,1,2,3\nz,4,5,6\n")
    m = ColumnManifest({"id": "ignore", "a": "candidate", "b": "candidate", "y": "target"}, "regression")
    d = load_csv(path, m)
    assert d.candidates == ("a", "b") and d.d_p == 0


def test_manifest_contracts():
    with pytest.raises(IngestionError):
        ColumnManifest({"a": "ignore", "b": "ignore"}, "regression")
    with pytest.raises(IngestionError):
        ColumnManifest({"a": "candidate", "b": "target", "c": "target"}, "regression")
    with pytest.raises(IngestionError):
        ColumnManifest({"a": "candidate", "b": "target"}, "classification")
    with pytest.raises(IngestionError):
        ColumnManifest({"a": "feature", "b": "target"}, "regression")


def test_ingestion_errors(tmp_path):
    m = ColumnManifest({"a": "candidate", "y": "target"}, "regression")
    with pytest.raises(IngestionError, match="not found"):
        load_csv(write(tmp_path, "a,z\n1,2\n"), m)
    with pytest.raises(IngestionError, match="row 3, column 'a'"):
        load_csv(write(tmp_path, "a,y\n1,2\nfoo,3\n"), m)
    with pytest.raises(IngestionError, match="no data rows"):
        load_csv(write(tmp_path, "a,y\n"), m)
    mc = ColumnManifest({"a": "candidate", "y": "target"}, "classification", "x")
    with pytest.raises(LabelError):
        load_csv(write(tmp_path, "a,y\n1,x\n2,y\n3,z\n"), mc)


def test_manifest_json_round_trip(tmp_path):
    m = ColumnManifest({"0.9V": "preselected", "0.5V": "candidate", "label": "target"}, "classification", "defect")
    m.write(tmp_path / "m.json")
    assert json.loads((tmp_path / "m.json").read_text())["columns"]["0.9V"] == "preselected"
    assert ColumnManifest.read(tmp_path / "m.json") == m


@pytest.mark.parametrize("make", [
    lambda: gen_tuning(50, seed=1),
    lambda: gen_open_defect(20, 30, seed=2),
    lambda: gen_planted(40, 5, 2, (1, 4), "classification", seed=3),
    lambda: gen_planted(1, 3, 0, (0,), "regression", seed=3),
])
def test_csv_round_trip_is_exact(tmp_path, make):
    d = make()
    write_csv(d, tmp_path / "d.csv")
    back = load_csv(tmp_path / "d.csv", manifest_for(d))
    for attr in ("Xp", "Xc", "Y"):
        assert np.array_equal(getattr(back, attr), getattr(d, attr))
    assert (back.preselected, back.candidates, back.target, back.task, back.layout) == \
        (d.preselected, d.candidates, d.target, d.task, d.layout)
    if d.task == "classification":
        assert back.classes == d.classes
    write_csv(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_bytes() == (tmp_path / "d.csv").read_bytes()


def test_stratified_split_counts():
    d = gen_open_defect(1000, 1000, seed=0)
    train, test = split(d, 0.25, seed=4)
    assert (train.n, test.n) == (1500, 500)
    assert train.labels().sum() == 750 and test.labels().sum() == 250


def test_split_is_seeded_and_disjoint():
    d = gen_planted(100, 3, 1, (0,), seed=0)
    a_tr, a_te = split(d, 0.3, seed=9)
    b_tr, b_te = split(d, 0.3, seed=9)
    assert np.array_equal(a_tr.Xc, b_tr.Xc) and np.array_equal(a_te.Xc, b_te.Xc)
    rows = {tuple(r) for r in a_tr.Xc} | {tuple(r) for r in a_te.Xc}
    assert len(rows) == 100


def test_split_stratification_error():
    d = gen_planted(10, 2, 1, (0,), "classification", seed=0, noise=0.0)
    with pytest.raises(StratificationError):
        split(d, 0.999, seed=0)
    with pytest.raises(StratificationError):
        split(d, 1.0, seed=0)


def test_standardize_definition_and_constant_column():
    Xc = np.array([[3.0, 1.0], [7.0, 1.0]])  # column 0: mean 5, std 2
    d = Dataset(np.zeros((2, 0)), Xc, [[0.0], [1.0]], (), ("a", "b"), "y", "regression")
    test = Dataset(np.zeros((1, 0)), [[7.0, 4.0]], [[2.0]], (), ("a", "b"), "y", "regression")
    tr, te, scaler = standardize(d, test)
    assert te.Xc[0, 0] == 1.0
    np.testing.assert_array_equal(tr.Xc[:, 1], [0.0, 0.0])
    assert scaler.xc_std[1] == 1e-8
    np.testing.assert_allclose(scaler.inverse_target(tr.Y), d.Y)


def test_standardize_matches_independent_recomputation():
    d = gen_planted(60, 3, 2, (0, 2), seed=5)
    train, test = split(d, 0.25, seed=1)
    _, te, _ = standardize(train, test)
    for j in range(d.d_c):
        col = list(train.Xc[:, j])
        mu, sd = statistics.fmean(col), statistics.pstdev(col)
        np.testing.assert_allclose(te.Xc[:, j], [(v - mu) / sd for v in test.Xc[:, j]], rtol=1e-12)
    ymu, ysd = statistics.fmean(train.Y[:, 0]), statistics.pstdev(train.Y[:, 0])
    np.testing.assert_allclose(te.Y[:, 0], (test.Y[:, 0] - ymu) / ysd, rtol=1e-12)


def test_classification_targets_not_scaled():
    d = gen_open_defect(10, 10, seed=0)
    tr, te = split(d, 0.5, seed=0)
    tr2, _, _ = standardize(tr, te)
    assert np.array_equal(tr2.Y, tr.Y)


# --- generators --------------------------------------------------------------

def test_open_defect_layout():
    d = gen_open_defect()
    assert (d.n, d.d_c, d.d_p) == (2000, 11, 1)
    assert d.preselected == ("0.9V",)
    assert len(VOLTAGES) == 12 and NOMINAL_VOLTAGE in VOLTAGES
    assert d.candidates[0] == "0.5V" and d.candidates[-1] == "1.05V"
    assert d.labels().sum() == 1000


def test_open_defect_without_noise_is_threshold_separable():
    d = gen_open_defect(200, 300, seed=1, noise_scale=0.0)
    low = d.Xc[:, d.candidates.index("0.5V")]
    bad, good = low[d.labels() == 1], low[d.labels() == 0]
    assert bad.min() > good.max()


def test_tuning_layout_and_noise_free_target():
    d = gen_tuning(300, seed=4, noise_scale=0.0)
    assert d.layout == ("c1", "c2", "c3", "c4", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "FoM")
    assert (d.d_c, d.d_p, d.preselected) == (10, 1, ("t2",))
    idx = dict(zip(d.candidates, range(d.d_c)))
    expected = tuning_fom(d.Xc[:, idx["t1"]], d.Xp[:, 0], d.Xc[:, idx["t3"]], d.Xc[:, idx["t4"]], d.Xc[:, idx["t5"]])
    assert np.array_equal(d.Y[:, 0], expected)
    assert [d.candidates[i] for i in tuning_relevant_indices(d)] == ["t1", "t3", "t4", "t5"]


def test_tuning_decoys_correlated_with_each_other_only():
    d = gen_tuning(20000, seed=0)
    idx = dict(zip(d.candidates, range(d.d_c)))
    corr = np.corrcoef(d.Xc, rowvar=False)
    assert corr[idx["c1"], idx["c2"]] > 0.5
    assert corr[idx["c1"], idx["t6"]] > 0.3
    resid = d.Y[:, 0] - tuning_fom(*(d.Xc[:, idx[n]] if n != "t2" else d.Xp[:, 0]
                                    for n in ("t1", "t2", "t3", "t4", "t5")))
    for name in ("c1", "c2", "c3", "c4", "t6", "t7"):
        assert abs(np.corrcoef(resid, d.Xc[:, idx[name]])[0, 1]) < 0.03


@pytest.mark.parametrize("gen", [
    lambda s: gen_tuning(100, seed=s),
    lambda s: gen_open_defect(30, 40, seed=s),
    lambda s: gen_planted(50, 4, 1, (1,), "classification", seed=s),
])
def test_generators_are_pure(gen):
    a, b, c = gen(3), gen(3), gen(4)
    assert np.array_equal(a.Xc, b.Xc) and np.array_equal(a.Y, b.Y) and np.array_equal(a.Xp, b.Xp)
    assert not np.array_equal(a.Xc, c.Xc)


def test_planted_contracts():
    d = gen_planted(1, 4, 1, (2,), seed=0)
    assert d.n == 1
    with pytest.raises(ArgumentError):
        gen_planted(10, 4, 1, (), seed=0)
    with pytest.raises(ArgumentError):
        gen_planted(10, 4, 1, (4,), seed=0)
    a, b = gen_planted(10, 4, 1, (0, 3), seed=0), gen_planted(10, 4, 1, (0, 3), seed=1)
    assert not np.array_equal(a.Y, b.Y) and a.candidates == b.candidates
