import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from condsel.errors import ArgumentError
from condsel.generators import gen_open_defect, gen_planted
from condsel.oracle import EvalConfig, combination_seed, evaluate_prepared, prepare
from condsel.selector import (SelectionReport, compare_with_oracle, fm_select, read_sweep_csv, select,
                              select_top_k, subset_sweep, sweep_subset, write_importance_csv,
                              write_sweep_csv)
from condsel.train import TrainConfig

FAST = EvalConfig(TrainConfig(epochs=5, batch_size=64), split_seed=0)


def test_top_k_examples():
    assert select_top_k([0.1, 0.4, 0.2, 0.3], 2) == [1, 3]
    assert select_top_k([0.3, 0.3, 0.4], 2) == [2, 0]
    assert select_top_k([0.3, 0.1, 0.6], 3) == [2, 0, 1]
    for k in (0, 4):
        with pytest.raises(ArgumentError):
            select_top_k([0.3, 0.1, 0.6], k)


scores = arrays(np.float64, st.integers(1, 10), elements=st.sampled_from([0.05, 0.1, 0.2, 0.3, 0.35]))


@settings(max_examples=100, deadline=None)
@given(scores, st.data())
def test_top_k_invariant_under_monotone_transform(v, data):
    k = data.draw(st.integers(1, v.size))
    for transform in (np.log, lambda x: 3 * x + 1, lambda x: x ** 3, np.exp):
        assert select_top_k(transform(v), k) == select_top_k(v, k)


def test_sweep_subset_rules():
    imp = [0.1, 0.5, 0.2, 0.2]
    assert sweep_subset(imp, 1, 1) == ()
    assert sweep_subset(imp, 3, 1) == (1, 2)
    assert sweep_subset(imp, 5, 1) == (0, 1, 2, 3)
    with pytest.raises(ArgumentError):
        sweep_subset(imp, 0, 1)
    with pytest.raises(ArgumentError):
        sweep_subset(imp, 6, 1)


def test_sweep_at_d_p_uses_only_nominal_voltage():
    d = gen_open_defect(200, 200, seed=0)
    imp = np.linspace(1, 0, d.d_c)
    (K, metric), = subset_sweep(d, imp, [1], FAST)
    train_d, test_d = prepare(d, FAST)
    assert metric == evaluate_prepared(train_d, test_d, (), FAST)
    assert K == 1


def test_sweep_full_size_equals_everything():
    d = gen_planted(300, 4, 1, (0, 1), seed=0)
    imp = [0.4, 0.3, 0.2, 0.1]
    (_, metric), = subset_sweep(d, imp, [5], FAST)
    train_d, test_d = prepare(d, FAST)
    assert metric == evaluate_prepared(train_d, test_d, (0, 1, 2, 3), FAST)


def test_sweep_matches_oracle_seeding_for_identical_subsets():
    d = gen_planted(300, 4, 1, (0, 1), seed=0)
    train_d, test_d = prepare(d, FAST)
    imp = [0.1, 0.4, 0.3, 0.2]
    (_, metric), = subset_sweep(d, imp, [3], FAST, prepared=(train_d, test_d))
    assert metric == evaluate_prepared(train_d, test_d, (1, 2), FAST)
    assert combination_seed(0, (1, 2)) == combination_seed(0, tuple(sorted(select_top_k(imp, 2))))


def test_sweep_rejects_dropping_preselected():
    d = gen_planted(100, 3, 2, (0,), seed=0)
    with pytest.raises(ArgumentError):
        subset_sweep(d, [0.3, 0.3, 0.4], [1, 3], FAST)


def test_planted_sweep_improves_once_planted_set_is_covered():
    cfg = EvalConfig(TrainConfig(epochs=15, batch_size=64), split_seed=0)
    for seed in range(3):
        d = gen_planted(1500, 6, 1, (0, 3), seed=seed)
        imp = np.array([0.3, 0.05, 0.05, 0.3, 0.05, 0.05])
        sweep = dict(subset_sweep(d, imp, [1, 3], cfg))
        assert sweep[3] < sweep[1]  # MSE: lower is better


def test_compare_with_oracle():
    a = [(1, 0.5), (2, 0.8)]
    assert compare_with_oracle(a, a) == [(1, 0.5, 0.5, 0.0), (2, 0.8, 0.8, 0.0)]
    gaps = compare_with_oracle([(1, 0.5), (2, 0.8)], [(1, 0.5), (2, 0.9)])
    assert gaps[1][3] == pytest.approx(-0.1)
    with pytest.raises(ArgumentError):
        compare_with_oracle(a, [(1, 0.5)])
    with pytest.raises(ArgumentError):
        compare_with_oracle(a, [(1, 0.5), (1, 0.6)])


def make_report():
    return SelectionReport(["a", "b", "c"], ["p"], [0.2, 1 / 3, 0.4666666666666667], chosen=[2, 1],
                           sweep=[(1, 0.5), (2, 0.75), (3, 0.9)], oracle={"k": 2, "indices": [1, 2], "metric": 0.9},
                           timings={"fm_train": 0.125})


def test_report_invariants():
    r = make_report()
    assert r.ranking == [2, 1, 0]
    with pytest.raises(ArgumentError):
        SelectionReport(["a", "b"], [], [0.5, 0.5], ranking=[0, 0])
    with pytest.raises(ArgumentError):
        SelectionReport(["a", "b"], [], [0.4, 0.6], chosen=[0])
    with pytest.raises(ArgumentError):
        SelectionReport(["a", "b"], [], [0.4, 0.6], sweep=[(2, 0.1), (1, 0.2)])


@pytest.mark.parametrize("timings", [True, False])
def test_report_round_trip_is_byte_identical(tmp_path, timings):
    r = make_report()
    r.write(tmp_path / "r.json", include_timings=timings)
    back = SelectionReport.read(tmp_path / "r.json")
    back.write(tmp_path / "r2.json", include_timings=timings)
    assert (tmp_path / "r.json").read_bytes() == (tmp_path / "r2.json").read_bytes()
    assert back.importance == r.importance and back.sweep == r.sweep


def test_importance_csv_layout(tmp_path):
    write_importance_csv(make_report(), tmp_path / "imp.csv")
    lines = (tmp_path / "imp.csv").read_text().splitlines()
    assert lines == ["candidate_name,importance,rank", "a,0.2,3", "b,0.3333333333333333,2",
                     "c,0.4666666666666667,1"]


def test_sweep_csv_round_trip(tmp_path):
    rows = [(1, 0.5), (3, 1 / 3)]
    write_sweep_csv(rows, tmp_path / "s.csv")
    assert read_sweep_csv(tmp_path / "s.csv") == rows
    cmp = compare_with_oracle(rows, [(1, 0.25), (3, 0.5)])
    write_sweep_csv(cmp, tmp_path / "c.csv")
    assert read_sweep_csv(tmp_path / "c.csv") == cmp


def test_fm_select_untrained_is_uniform():
    d = gen_planted(100, 5, 1, (0,), seed=0)
    train_d, _ = prepare(d, FAST)
    result = fm_select(train_d, TrainConfig(epochs=0))
    np.testing.assert_allclose(result.importance, 0.2, atol=1e-15)


def test_select_is_deterministic_and_reports_candidates_only():
    d = gen_planted(400, 5, 2, (1, 4), seed=3)
    r1, _ = select(d, TrainConfig(epochs=3, seed=2), k=2)
    r2, _ = select(d, TrainConfig(epochs=3, seed=2), k=2)
    assert r1.to_json(False) == r2.to_json(False)
    assert len(r1.importance) == d.d_c and r1.preselected == ["p0", "p1"]
