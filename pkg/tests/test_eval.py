import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bugsight.dataset import DatasetError
from bugsight.eval import (
    contact_sheet,
    evaluate,
    label_frames,
    oracle_scorer,
    plot_curves,
    precision_at_k,
    precision_curve,
    rank_order,
    rank_report,
    read_summary,
)


def test_label_is_strict():
    np.testing.assert_array_equal(label_frames([0, 10, 11, 500], 10), [False, False, True, True])


def test_separable_scores_give_precision_one():
    s = np.array([9.0, 8, 7, 1, 0.5, 0.1])
    y = np.array([1, 1, 1, 0, 0, 0], dtype=bool)
    rows = precision_curve(s, y)
    assert [r[0] for r in rows] == [9.0, 8.0, 7.0]
    assert all(r[4] == 1.0 for r in rows)
    assert rows[-1][1:4] == (3, 0, 0)


def test_hand_worked_curve():
    s = np.array([5.0, 4, 4, 3, 2, 1])
    y = np.array([1, 0, 1, 0, 1, 0], dtype=bool)
    rows = precision_curve(s, y)
    # thresholds 5, 4, 2; score >= t flagged
    assert rows == [(5.0, 1, 0, 2, 1.0), (4.0, 2, 1, 1, 2 / 3), (2.0, 3, 2, 0, 0.6)]


def test_single_positive():
    s = np.array([0.2, 3.0, 0.1])
    rows = precision_curve(s, np.array([False, True, False]))
    assert rows == [(3.0, 1, 0, 0, 1.0)]


def test_no_positives_is_nan_row():
    (t, tp, fp, fn, p), = precision_curve(np.array([1.0, 2.0]), np.zeros(2, dtype=bool))
    assert math.isnan(t) and math.isnan(p) and (tp, fp, fn) == (0, 2, 0)


def test_constant_scorer_gives_base_rate():
    y = np.random.default_rng(0).random(200) < 0.3
    rows = precision_curve(np.ones(200), y)
    assert len(rows) == 1 and rows[0][4] == pytest.approx(y.mean())


def test_random_scores_precision_near_base_rate():
    rng = np.random.default_rng(1)
    n, rate, k, trials = 400, 0.25, 50, 300
    vals = []
    for _ in range(trials):
        y = rng.random(n) < rate
        s = rng.random(n)
        vals.append(precision_at_k(s, y, [(0, i) for i in range(n)], k))
    se = math.sqrt(rate * (1 - rate) / k / trials)
    assert abs(np.mean(vals) - rate) < 3 * se + 0.005


def test_rank_order_ties_by_reference():
    s = [1.0, 3.0, 3.0, 2.0, 3.0]
    refs = [("b", 0), ("b", 1), ("a", 7), ("a", 0), ("a", 2)]
    order = rank_order(s, refs)
    assert order == [4, 2, 1, 3, 0]
    rep = rank_report(s, refs, [1, 1, 0, 0, 1], limit=2)
    assert rep == [(1, "a", 2, 3.0, True), (2, "a", 7, 3.0, False)]


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 300), min_size=1, max_size=60))
def test_oracle_precision_one_and_tau_monotone(counts):
    counts = np.array(counts)
    s = counts.astype(float)
    prev = None
    for tau in (0, 1, 10, 50, 200):
        y = label_frames(counts, tau)
        if prev is not None:
            assert y.sum() <= prev
        prev = y.sum()
        for r in precision_curve(s, y):
            assert math.isnan(r[4]) if not y.any() else r[4] == 1.0
        refs = [(0, i) for i in range(len(s))]
        order = rank_order(s, refs)
        assert all(s[a] >= s[b] for a, b in zip(order, order[1:]))
        if y.any():
            assert s[order[0]] == s.max()


def test_plot_and_sheet_shapes():
    img = plot_curves({10: [(3.0, 1, 0, 1, 1.0), (1.0, 2, 2, 0, 0.5)], 50: [(float("nan"), 0, 4, 0, float("nan"))]})
    assert img.shape == (240, 320, 3) and img.dtype == np.uint8
    frames = np.zeros((7, 3, 4, 5), dtype=np.uint8)
    sheet = contact_sheet(frames, cols=3, gap=1, border=[(255, 0, 0)] * 7)
    assert sheet.shape == (3 * 5 + 1, 3 * 6 + 1, 3)
    assert tuple(sheet[0, 0]) == (255, 0, 0)


def test_oracle_report_and_determinism(tiny_dataset, tmp_path):
    data, manifest = tiny_dataset
    a = evaluate(oracle_scorer, data, tmp_path / "a", taus=(1, 10))
    evaluate(oracle_scorer, data, tmp_path / "b", taus=(1, 10))
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert {"summary.csv", "scores.csv", "black_screen.csv", "texture_missing.ppm"} <= {str(f) for f in files}
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f
    rows = read_summary(tmp_path / "a" / "summary.csv")
    assert len(rows) == 4 and len(a) == 4
    for r in rows:
        if int(r["positives"]):
            assert float(r["p@10"]) == 1.0 or int(r["positives"]) < 10


def test_missing_masks_raise(tiny_dataset, tmp_path):
    import shutil

    src, manifest = tiny_dataset
    data = tmp_path / "d"
    shutil.copytree(src, data)
    ep = data / manifest["partitions"]["test"]["black_screen"][0]["dir"]
    meta = (ep / "meta.json").read_text().replace('"has_masks": true', '"has_masks": false')
    (ep / "meta.json").write_text(meta)
    with pytest.raises(DatasetError, match="no masks"):
        evaluate(oracle_scorer, data, tmp_path / "out")


def test_unknown_kind(tiny_dataset, tmp_path):
    with pytest.raises(DatasetError, match="no test split"):
        evaluate(oracle_scorer, tiny_dataset[0], tmp_path, kinds=["z_fighting"])
