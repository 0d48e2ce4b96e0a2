"""Error ratios on hand-enumerable cases."""

import numpy as np
import pytest

from voxseg.errors import UndefinedMetricError, ValidationError
from voxseg.metrics import (ClusterErrorCounts, defuzzify, error_counts,
                            evaluate_labels, incorrect_segmentation,
                            over_segmentation, relative_improvement,
                            under_segmentation)
from voxseg.volume import LabelVolume


def hand_case():
    # 12 voxels, cluster 1: truth has 4, prediction misses 1 of them and
    # claims 2 outsiders, so n_fp=2, n_fn=1, n_p=4, n_n=8
    truth = LabelVolume.from_flat((12, 1, 1), [1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0])
    pred = LabelVolume.from_flat((12, 1, 1), [1, 1, 1, 0, 1, 1, 0, 0, 0, 0, 0, 0])
    return pred, truth


def test_twelve_voxel_hand_case():
    pred, truth = hand_case()
    counts = error_counts(pred, truth, 1)
    assert (counts.n_fp, counts.n_fn, counts.n_p, counts.n_n) == (2, 1, 4, 8)
    assert under_segmentation(counts) == 0.25
    assert over_segmentation(counts) == 0.25
    assert incorrect_segmentation(counts) == 0.25


def test_incorrect_segmentation_literal_variant():
    pred, truth = hand_case()
    counts = error_counts(pred, truth, 1)
    assert incorrect_segmentation(counts, literal=True) == (0.25 + 0.25) / 12


def test_relative_improvement():
    assert relative_improvement(0.2, 0.1) == 50.0
    assert relative_improvement(0.1, 0.2) == -100.0
    with pytest.raises(UndefinedMetricError):
        relative_improvement(0.0, 0.1)


def test_error_counts_brute_force():
    rng = np.random.default_rng(8)
    t = rng.integers(0, 3, size=60)
    p = rng.integers(0, 3, size=60)
    truth = LabelVolume.from_flat((60, 1, 1), t)
    pred = LabelVolume.from_flat((60, 1, 1), p)
    for k in range(3):
        counts = error_counts(pred, truth, k)
        assert counts.n_fp == sum(1 for a, b in zip(p, t) if a == k and b != k)
        assert counts.n_fn == sum(1 for a, b in zip(p, t) if a != k and b == k)
        assert counts.n_p == sum(1 for b in t if b == k)
        assert counts.n_n == 60 - counts.n_p
        assert counts.total == 60


def test_undefined_metrics():
    whole = ClusterErrorCounts(n_fp=0, n_fn=0, n_p=10, n_n=0)
    with pytest.raises(UndefinedMetricError):
        under_segmentation(whole)
    absent = ClusterErrorCounts(n_fp=3, n_fn=0, n_p=0, n_n=10)
    with pytest.raises(UndefinedMetricError):
        over_segmentation(absent)
    empty = ClusterErrorCounts(n_fp=0, n_fn=0, n_p=0, n_n=0)
    with pytest.raises(UndefinedMetricError):
        incorrect_segmentation(empty)


def test_dims_mismatch():
    a = LabelVolume.from_flat((4, 1, 1), [0, 1, 0, 1])
    b = LabelVolume.from_flat((2, 2, 1), [0, 1, 0, 1])
    with pytest.raises(ValidationError):
        error_counts(a, b, 0)


def test_defuzzify_argmax_and_ties():
    u = np.array([[0.2, 0.8],
                  [0.5, 0.5],
                  [0.9, 0.1]])
    lab = defuzzify(u, (3, 1, 1))
    assert lab.labels.ravel().tolist() == [1, 0, 0]
    assert lab.labels.dtype == np.uint8


def test_defuzzify_validation():
    with pytest.raises(ValidationError):
        defuzzify(np.ones(4), (4, 1, 1))
    with pytest.raises(ValidationError):
        defuzzify(np.ones((4, 2)), (3, 1, 1))


def test_evaluate_labels_report():
    pred, truth = hand_case()
    rep = evaluate_labels(pred, truth, 2)
    assert [r["cluster"] for r in rep["per_cluster"]] == [0, 1]
    row = rep["per_cluster"][1]
    assert (row["uns"], row["os"], row["incs"]) == (0.25, 0.25, 0.25)
    expected_mean = np.mean([r["incs"] for r in rep["per_cluster"]])
    assert rep["mean_incs"] == expected_mean
    assert rep["mean_uns"] == np.mean([r["uns"] for r in rep["per_cluster"]])


def test_evaluate_labels_rejects_out_of_range():
    pred, truth = hand_case()
    with pytest.raises(ValidationError):
        evaluate_labels(pred, truth, 1)  # label 1 present but clusters=1
    with pytest.raises(ValidationError):
        evaluate_labels(pred, truth, 0)
