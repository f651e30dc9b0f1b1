import csv

import numpy as np
import pytest

from clickvos.errors import GapError, ShapeError
from clickvos.evaluation.metrics import boundary_f, boundary_map, db_statistics, default_tolerance, region_j
from clickvos.evaluation.report import ALL, CSV_HEADER, evaluate, scored_frames, write_csv, write_statistics_csv


def _box(shape, top, left, height, width):
    mask = np.zeros(shape, dtype=bool)
    mask[top:top + height, left:left + width] = True
    return mask


def test_region_similarity():
    assert region_j(_box((8, 8), 0, 0, 2, 2), _box((8, 8), 0, 0, 2, 3)) == pytest.approx(4 / 6)
    assert region_j(np.zeros((4, 4)), np.zeros((4, 4))) == 1.0
    assert region_j(_box((4, 4), 0, 0, 1, 1), np.zeros((4, 4))) == 0.0
    with pytest.raises(ShapeError):
        region_j(np.zeros((4, 4)), np.zeros((4, 5)))


def test_boundary_map_treats_the_image_edge_as_outside():
    assert boundary_map(np.ones((3, 3), dtype=bool)).sum() == 8
    assert boundary_map(_box((10, 10), 2, 2, 5, 5)).sum() == 16


def test_boundary_f_cases():
    gt = _box((32, 32), 8, 8, 10, 10)
    assert boundary_f(gt, gt) == 1.0
    assert boundary_f(_box((32, 32), 9, 8, 10, 10), gt, tolerance=1) == 1.0
    assert boundary_f(_box((32, 32), 12, 8, 10, 10), gt, tolerance=1) < 1.0
    assert boundary_f(np.zeros((32, 32)), gt) == 0.0
    assert boundary_f(gt, np.zeros((32, 32))) == 0.0
    assert boundary_f(np.zeros((32, 32)), np.zeros((32, 32))) == 1.0
    with pytest.raises(ValueError):
        boundary_f(gt, gt, tolerance=0)


def test_scores_ignore_a_shared_translation(rng):
    for _ in range(20):
        pred, gt = np.zeros((24, 24), dtype=bool), np.zeros((24, 24), dtype=bool)
        pred[4:12, 4:12] = rng.random((8, 8)) < 0.6
        gt[4:12, 4:12] = rng.random((8, 8)) < 0.6
        dy, dx = (int(v) for v in rng.integers(-3, 8, size=2))
        moved_pred = np.roll(pred, (dy, dx), axis=(0, 1))
        moved_gt = np.roll(gt, (dy, dx), axis=(0, 1))
        assert region_j(moved_pred, moved_gt) == region_j(pred, gt)
        assert boundary_f(moved_pred, moved_gt, tolerance=1) == pytest.approx(boundary_f(pred, gt, tolerance=1),
                                                                              abs=1e-15)


def test_region_similarity_falls_as_a_superset_grows():
    gt = _box((32, 32), 12, 12, 8, 8)
    scores = [region_j(_box((32, 32), 12 - r, 12 - r, 8 + 2 * r, 8 + 2 * r), gt) for r in range(8)]
    assert scores[0] == 1.0
    assert all(a > b for a, b in zip(scores, scores[1:]))


def test_default_tolerance_scales_with_the_diagonal():
    assert default_tolerance(16, 16) == 1
    assert default_tolerance(480, 854) == 8


def test_db_statistics():
    assert db_statistics([1.0, 1.0, 0.0, 0.0]) == (0.5, 0.5, 1.0)
    mean, recall, decay = db_statistics([0.9, 0.4, 0.6])
    assert mean == pytest.approx(0.6333333333)
    assert recall == pytest.approx(2 / 3)
    assert decay == 0.0
    assert db_statistics([]) == (0.0, 0.0, 0.0)


def _two_sequences():
    gt_a = np.zeros((3, 16, 16), dtype=np.uint8)
    gt_a[:, 2:6, 2:6] = 1
    gt_a[:, 9:14, 9:14] = 2
    pred_a = gt_a.copy()
    pred_a[pred_a == 2] = 0
    gt_b = np.zeros((3, 16, 16), dtype=np.uint8)
    gt_b[:, 4:10, 4:10] = 1
    return {"a": pred_a, "b": gt_b.copy()}, {"a": gt_a, "b": gt_b}


def test_evaluate_averages_objects_then_sequences():
    pred, gt = _two_sequences()
    report = evaluate(pred, gt)
    assert report.sequences["a"] == (0.5, 0.5)
    assert report.sequences["b"] == (1.0, 1.0)
    assert (report.j, report.f, report.jf) == (0.75, 0.75, 0.75)
    assert len(report.frames) == 3 * 3
    assert report.rows()[-1] == (ALL, "mean", "mean", 0.75, 0.75, 0.75)


def test_threaded_evaluation_matches_serial():
    pred, gt = _two_sequences()
    assert evaluate(pred, gt, jobs=2).rows() == evaluate(pred, gt).rows()


def test_frame_selection():
    assert scored_frames(4) == [0, 1, 2, 3]
    assert scored_frames(4, include_first=False) == [1, 2, 3]
    assert scored_frames(4, first_frame_only=True) == [0]
    pred, gt = _two_sequences()
    pred["b"][1:] = 0
    assert evaluate(pred, gt, first_frame_only=True).j == 0.75
    assert evaluate(pred, gt, include_first=False).sequences["b"] == (0.0, 0.0)


def test_gaps_are_listed_together():
    pred, gt = _two_sequences()
    del pred["a"]
    pred["b"] = pred["b"][:2]
    pred["c"] = gt["b"]
    with pytest.raises(GapError) as info:
        evaluate(pred, gt)
    assert len(info.value.gaps) == 3
    assert info.value.exit_code == 2
    assert "missing sequence 'a'" in info.value.gaps


def test_csv_reports(tmp_path):
    pred, gt = _two_sequences()
    report = evaluate(pred, gt)
    with write_csv(report, tmp_path / "report.csv").open(newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1] == ["a", "1", "1", "1.000000", "1.000000", "1.000000"]
    assert rows[-1] == [ALL, "mean", "mean", "0.750000", "0.750000", "0.750000"]
    assert sum(1 for r in rows if r[2] == "mean" and r[1] != "mean") == 3

    with write_statistics_csv(report, tmp_path / "stats.csv").open(newline="") as f:
        stats = list(csv.reader(f))
    assert stats[0][:3] == ["sequence", "object_id", "J_M"]
    assert len(stats) == 1 + 3
