import math

import numpy as np
import pytest

from clickvos.engine.gradcheck import grad_check
from clickvos.engine.tensor import Tensor
from clickvos.errors import ShapeError
from clickvos.training.losses import loss_bootstrapped_ce, loss_dice, pixel_cross_entropy


def _numpy_ce(logits, gt):
    n = logits.shape[0]
    rows = logits.reshape(n, -1).T
    rows = rows - rows.max(axis=1, keepdims=True)
    log_probs = rows - np.log(np.exp(rows).sum(axis=1, keepdims=True))
    return -log_probs[np.arange(rows.shape[0]), gt.reshape(-1)]


def _numpy_dice(logits, gt, eps=1e-6):
    n = logits.shape[0]
    rows = logits.reshape(n, -1).T
    probs = np.exp(rows - rows.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    labels = gt.reshape(-1)
    scores = []
    for c in np.unique(labels):
        target = labels == c
        scores.append(2 * probs[target, c].sum() / (probs[:, c].sum() + target.sum() + eps))
    return 1 - np.mean(scores)


@pytest.fixture
def logits_and_gt(rng):
    return rng.normal(size=(3, 4, 5)), rng.integers(0, 3, size=(4, 5))


def test_pixel_cross_entropy_matches_numpy(logits_and_gt):
    logits, gt = logits_and_gt
    np.testing.assert_allclose(pixel_cross_entropy(Tensor(logits), gt).numpy(), _numpy_ce(logits, gt), rtol=1e-12)


@pytest.mark.parametrize("ratio", [0.1, 0.4, 0.75])
def test_bootstrapped_ce_averages_the_hardest_pixels(logits_and_gt, ratio):
    logits, gt = logits_and_gt
    ce = np.sort(_numpy_ce(logits, gt))[::-1]
    k = math.ceil(ratio * ce.size)
    assert loss_bootstrapped_ce(Tensor(logits), gt, ratio).item() == pytest.approx(ce[:k].mean(), rel=1e-12)


def test_bootstrapped_ce_with_full_ratio_is_the_mean(logits_and_gt):
    logits, gt = logits_and_gt
    assert loss_bootstrapped_ce(Tensor(logits), gt, 1.0).item() == pytest.approx(_numpy_ce(logits, gt).mean())


def test_bootstrapped_ce_rejects_bad_ratios(logits_and_gt):
    logits, gt = logits_and_gt
    for ratio in (0.0, 1.5):
        with pytest.raises(ValueError):
            loss_bootstrapped_ce(Tensor(logits), gt, ratio)


def test_dice_matches_numpy(logits_and_gt):
    logits, gt = logits_and_gt
    assert loss_dice(Tensor(logits), gt).item() == pytest.approx(_numpy_dice(logits, gt), rel=1e-12)


def test_dice_is_near_zero_for_confident_correct_logits():
    gt = np.array([[0, 1], [2, 1]])
    logits = np.full((3, 2, 2), -30.0)
    for y in range(2):
        for x in range(2):
            logits[gt[y, x], y, x] = 30.0
    assert loss_dice(Tensor(logits), gt).item() < 1e-6


def test_losses_check_label_shapes(logits_and_gt):
    logits, gt = logits_and_gt
    with pytest.raises(ShapeError):
        loss_dice(Tensor(logits), gt[:, :4])
    with pytest.raises(ShapeError):
        pixel_cross_entropy(Tensor(logits), np.full((4, 5), 3))


def test_loss_gradients_pass_finite_differences(logits_and_gt):
    logits, gt = logits_and_gt
    x = Tensor(logits, requires_grad=True, name="logits")
    report = grad_check(lambda: loss_bootstrapped_ce(x, gt, 0.4) + loss_dice(x, gt), [x], h=1e-6, tol=1e-5)
    assert report.passed, report.as_dict()
