"""Mask encodings and focal loss against hand values and finite differences."""

import math

import numpy as np
import pytest

from hipmetrics import (
    FocalLossInput,
    Point2D,
    binary_mask,
    cross_entropy_loss,
    focal_keypoint_loss,
    focal_loss_gradient,
    heatmap_mask,
)
from hipmetrics.errors import InvalidProbability, InvalidSigma, OutOfBounds

# --- masks -------------------------------------------------------------------


def test_binary_mask_rounding():
    mask = binary_mask(Point2D(2.2, 1.8), width=4, height=4)
    assert mask.values[2, 2] == 1.0
    assert mask.values.sum() == 1.0
    assert mask.kind == "binary"


def test_binary_mask_one_by_one():
    mask = binary_mask(Point2D(0.0, 0.0), width=1, height=1)
    assert mask.values.tolist() == [[1.0]]


def test_binary_mask_out_of_bounds():
    with pytest.raises(OutOfBounds):
        binary_mask(Point2D(5.0, 0.0), width=4, height=4)
    with pytest.raises(OutOfBounds):
        binary_mask(Point2D(3.6, 0.0), width=4, height=4)  # rounds to column 4


def test_heatmap_peak_and_neighbor():
    mask = heatmap_mask(Point2D(2.0, 2.0), width=5, height=5, sigma=1.0)
    assert mask.values[2, 2] == 1.0
    assert mask.values[2, 3] == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert mask.values[1, 2] == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert np.all((mask.values >= 0.0) & (mask.values <= 1.0))


def test_heatmap_tiny_sigma_approaches_binary():
    hm = heatmap_mask(Point2D(1.0, 2.0), width=4, height=4, sigma=1e-3)
    bm = binary_mask(Point2D(1.0, 2.0), width=4, height=4)
    assert np.allclose(hm.values, bm.values, atol=1e-12)


def test_heatmap_invalid_sigma_and_bounds():
    with pytest.raises(InvalidSigma):
        heatmap_mask(Point2D(1.0, 1.0), width=4, height=4, sigma=0.0)
    with pytest.raises(OutOfBounds):
        heatmap_mask(Point2D(-1.0, 0.0), width=4, height=4, sigma=1.0)


# --- focal loss ------------------------------------------------------------------


def _random_input(rng, gamma, k=3, h=4, w=4):
    probs = rng.uniform(0.02, 0.98, size=(k, h, w))
    targets = np.zeros((k, h, w), dtype=np.int64)
    for i in range(k):
        targets[i, rng.integers(0, h), rng.integers(0, w)] = 1
    return FocalLossInput(probs=probs, targets=targets, gamma=gamma)


def test_focal_gamma_zero_equals_cross_entropy():
    rng = np.random.default_rng(12)
    for _ in range(20):
        inp = _random_input(rng, gamma=0.0)
        assert focal_keypoint_loss(inp) == pytest.approx(cross_entropy_loss(inp), abs=1e-12)


def test_focal_single_positive_hand_value():
    inp = FocalLossInput(
        probs=np.array([[[0.9]]]), targets=np.array([[[1]]]), gamma=2.0, normalizer=1.0
    )
    expected = 0.01 * (-math.log(0.9))
    assert expected == pytest.approx(1.0536e-3, abs=1e-7)
    assert focal_keypoint_loss(inp) == pytest.approx(expected, abs=1e-15)


def test_focal_negative_cell_mirrors_positive():
    pos = FocalLossInput(
        probs=np.array([[[0.9]]]), targets=np.array([[[1]]]), gamma=2.0, normalizer=1.0
    )
    neg = FocalLossInput(
        probs=np.array([[[0.1]]]), targets=np.array([[[0]]]), gamma=2.0, normalizer=1.0
    )
    assert focal_keypoint_loss(neg) == pytest.approx(focal_keypoint_loss(pos), abs=1e-15)


def test_focal_never_exceeds_cross_entropy():
    rng = np.random.default_rng(13)
    for _ in range(20):
        inp2 = _random_input(rng, gamma=2.0)
        inp0 = FocalLossInput(probs=inp2.probs, targets=inp2.targets, gamma=0.0)
        assert focal_keypoint_loss(inp2) <= focal_keypoint_loss(inp0) + 1e-15


def test_focal_permutation_invariant_over_keypoints():
    rng = np.random.default_rng(14)
    inp = _random_input(rng, gamma=2.0, k=5)
    perm = rng.permutation(5)
    shuffled = FocalLossInput(probs=inp.probs[perm], targets=inp.targets[perm], gamma=2.0)
    assert focal_keypoint_loss(shuffled) == pytest.approx(focal_keypoint_loss(inp), abs=1e-12)


def test_focal_perfect_prediction_limit():
    probs = np.where(
        np.eye(4)[None, :, :] == 1, 1.0 - 1e-9, 1e-9
    )
    targets = np.eye(4, dtype=np.int64)[None, :, :]
    inp = FocalLossInput(probs=probs, targets=targets, gamma=2.0)
    assert focal_keypoint_loss(inp) < 1e-12


def test_focal_invalid_probabilities():
    with pytest.raises(InvalidProbability):
        FocalLossInput(probs=np.array([[[0.0]]]), targets=np.array([[[1]]]))
    with pytest.raises(InvalidProbability):
        FocalLossInput(probs=np.array([[[1.0]]]), targets=np.array([[[0]]]))


def test_focal_default_normalizer_is_keypoint_count():
    rng = np.random.default_rng(15)
    inp = _random_input(rng, gamma=2.0, k=4)
    explicit = FocalLossInput(probs=inp.probs, targets=inp.targets, gamma=2.0, normalizer=4.0)
    assert focal_keypoint_loss(inp) == pytest.approx(focal_keypoint_loss(explicit), abs=1e-15)


# --- gradient ----------------------------------------------------------------------


def test_gradient_cross_entropy_positive_cell():
    inp = FocalLossInput(
        probs=np.array([[[0.37]]]), targets=np.array([[[1]]]), gamma=0.0, normalizer=1.0
    )
    grad = focal_loss_gradient(inp)
    assert grad[0, 0, 0] == pytest.approx(-1.0 / 0.37, abs=1e-12)


def _fd_gradient(inp, h=1e-6):
    base = inp.probs
    grad = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus = base.copy()
        minus = base.copy()
        plus[idx] += h
        minus[idx] -= h
        lp = focal_keypoint_loss(
            FocalLossInput(plus, inp.targets, inp.gamma, inp.normalizer)
        )
        lm = focal_keypoint_loss(
            FocalLossInput(minus, inp.targets, inp.gamma, inp.normalizer)
        )
        grad[idx] = (lp - lm) / (2.0 * h)
    return grad


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(16)
    worst = 0.0
    for _ in range(100):
        gamma = float(rng.choice([0.0, 1.0, 2.0, 3.0]))
        inp = _random_input(rng, gamma=gamma, k=2, h=3, w=3)
        analytic = focal_loss_gradient(inp)
        numeric = _fd_gradient(inp)
        scale = np.maximum(np.abs(numeric), 1e-3)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / scale)))
    assert worst < 1e-6


def test_gradient_negative_mirrors_positive():
    pos = FocalLossInput(
        probs=np.array([[[0.3]]]), targets=np.array([[[1]]]), gamma=2.0, normalizer=1.0
    )
    neg = FocalLossInput(
        probs=np.array([[[0.7]]]), targets=np.array([[[0]]]), gamma=2.0, normalizer=1.0
    )
    assert focal_loss_gradient(neg)[0, 0, 0] == pytest.approx(
        -focal_loss_gradient(pos)[0, 0, 0], abs=1e-12
    )
