"""Randomized oracle checks plus the long-running training criteria (marked slow)."""

import math
from collections import Counter

import numpy as np
import pytest

from clickvos.annotation.points import annotate_first_frame, sample_point
from clickvos.annotation.morphology import erode_mask, erosion_depth
from clickvos.engine import functional as F
from clickvos.engine.gradcheck import grad_check
from clickvos.engine.layers import MultiHeadAttention, make_generator
from clickvos.evaluation.metrics import boundary_f, region_j
from clickvos.model.tokens import IdentityBank, mask_pool
from clickvos.training.losses import loss_bootstrapped_ce, loss_dice


def _boundary_oracle(mask):
    h, w = mask.shape
    cells = set()
    for y, x in zip(*np.nonzero(mask)):
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ny, nx = y + dy, x + dx
            if not (0 <= ny < h and 0 <= nx < w) or not mask[ny, nx]:
                cells.add((y, x))
                break
    return np.array(sorted(cells)).reshape(-1, 2)


def _f_oracle(pred, gt, tolerance):
    pb, gb = _boundary_oracle(pred), _boundary_oracle(gt)
    if len(pb) == 0 and len(gb) == 0:
        return 1.0
    if len(pb) == 0 or len(gb) == 0:
        return 0.0
    dist = np.abs(pb[:, None, :] - gb[None, :, :]).max(axis=-1)
    precision = (dist.min(axis=1) <= tolerance).mean()
    recall = (dist.min(axis=0) <= tolerance).mean()
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _majority(cell):
    counts = Counter(cell.reshape(-1).tolist())
    best = max(counts.values())
    return min(label for label, n in counts.items() if n == best)


def test_metrics_match_brute_force_on_random_masks():
    rng = np.random.default_rng(0)
    for _ in range(100):
        shape = tuple(rng.integers(4, 12, size=2))
        pred = rng.random(shape) < rng.uniform(0.1, 0.7)
        gt = rng.random(shape) < rng.uniform(0.1, 0.7)
        tolerance = int(rng.integers(1, 3))
        union = (pred | gt).sum()
        want_j = 1.0 if union == 0 else (pred & gt).sum() / union
        assert abs(region_j(pred, gt) - want_j) <= 1e-12
        assert abs(boundary_f(pred, gt, tolerance) - _f_oracle(pred, gt, tolerance)) <= 1e-12
        assert region_j(pred, gt) == region_j(gt, pred)
        assert boundary_f(pred, gt, tolerance) == pytest.approx(boundary_f(gt, pred, tolerance), abs=1e-15)


def test_mask_pool_matches_brute_force_votes():
    rng = np.random.default_rng(1)
    bank = IdentityBank(4, 6, make_generator(0))
    for _ in range(100):
        stride = int(rng.choice([2, 4]))
        h, w = (int(v) for v in rng.integers(1, 4, size=2))
        grid = rng.normal(size=(6, h, w))
        mask = rng.integers(0, 4, size=(h * stride, w * stride))
        pooled = mask_pool(F.constant(grid), mask, bank, stride, [0, 1, 2, 3]).z.numpy()
        votes = np.array([[_majority(mask[r * stride:(r + 1) * stride, c * stride:(c + 1) * stride])
                           for c in range(w)] for r in range(h)])
        for row, oid in enumerate(range(4)):
            sel = votes == oid
            want = grid[:, sel].mean(axis=1) if sel.any() else np.zeros(6)
            np.testing.assert_allclose(pooled[row], want, rtol=0, atol=1e-9)


def test_identity_attention_matches_dense_computation():
    rng = np.random.default_rng(2)
    for _ in range(100):
        heads = int(rng.choice([1, 2, 4]))
        d = heads * int(rng.integers(1, 4))
        q = rng.normal(size=(int(rng.integers(1, 5)), d))
        kv = rng.normal(size=(int(rng.integers(1, 6)), d))
        out = MultiHeadAttention(d, heads)(F.constant(q), F.constant(kv), F.constant(kv)).numpy()
        dk = d // heads
        want = []
        for hd in range(heads):
            cols = slice(hd * dk, (hd + 1) * dk)
            s = q[:, cols] @ kv[:, cols].T / math.sqrt(dk)
            a = np.exp(s - s.max(axis=1, keepdims=True))
            want.append((a / a.sum(axis=1, keepdims=True)) @ kv[:, cols])
        np.testing.assert_allclose(out, np.concatenate(want, axis=1), rtol=0, atol=1e-9)


def test_losses_match_direct_formulas():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n, h, w = int(rng.integers(2, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 5))
        logits = rng.normal(size=(n, h, w))
        gt = rng.integers(0, n, size=(h, w))
        rows = logits.reshape(n, -1).T
        shifted = rows - rows.max(axis=1, keepdims=True)
        log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        labels = gt.reshape(-1)
        ce = -log_p[np.arange(labels.size), labels]
        ratio = float(rng.uniform(0.05, 1.0))
        k = max(1, math.ceil(ratio * ce.size - 1e-9))
        want_ce = np.sort(ce)[::-1][:k].mean()
        probs = np.exp(log_p)
        dice = [2 * probs[labels == c, c].sum() / (probs[:, c].sum() + (labels == c).sum() + 1e-6)
                for c in np.unique(labels)]
        assert abs(loss_bootstrapped_ce(F.constant(logits), gt, ratio).item() - want_ce) <= 1e-9
        assert abs(loss_dice(F.constant(logits), gt).item() - (1 - np.mean(dice))) <= 1e-9


def test_click_sampling_is_uniform_and_erosion_aware():
    rng = np.random.default_rng(4)
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 0] = mask[1, 2] = True
    hits = Counter(sample_point(mask, rng) for _ in range(10_000))
    assert set(hits) == {(0, 1), (2, 1)}
    assert all(0.45 <= n / 10_000 <= 0.55 for n in hits.values())

    square = np.zeros((30, 30), dtype=np.uint8)
    square[5:25, 5:25] = 1
    assert erosion_depth(square == 1) == 2
    interior = np.zeros_like(square, dtype=bool)
    interior[7:23, 7:23] = True
    np.testing.assert_array_equal(erode_mask(square == 1, 2), interior)
    for seed in range(50):
        p = annotate_first_frame(square, seed).by_id()[1]
        assert interior[p.y, p.x]

    dot = np.zeros((8, 8), dtype=np.uint8)
    dot[3, 5] = 1
    p = annotate_first_frame(dot, 0).by_id()[1]
    assert (p.x, p.y, p.fallback) == (5, 3, True)


@pytest.mark.slow
def test_annotation_protocol_over_many_points():
    from clickvos.data.scene import gen_sequence, make_specs

    seen = 0
    for spec in make_specs(50, 64, 64, 1, 3, seed=11):
        mask = gen_sequence(spec).masks[0]
        for seed in range(67):
            points = annotate_first_frame(mask, seed)
            assert points.coords() == annotate_first_frame(mask, seed).coords()
            for p in points:
                assert mask[p.y, p.x] == p.object_id
                if p.object_id and not p.fallback:
                    region = mask == p.object_id
                    assert erode_mask(region, erosion_depth(region))[p.y, p.x]
                seen += 1
    assert seen >= 10_000


@pytest.mark.slow
def test_full_forward_passes_finite_differences(square_spec):
    from clickvos.data.scene import gen_sequence
    from clickvos.model.abs_net import ABSNet
    from clickvos.model.config import ModelConfig

    sample = gen_sequence(square_spec(frames=1))
    points = annotate_first_frame(sample.masks[0], 0)
    model = ABSNet(ModelConfig(channels=16, n_heads=2, stride=4, max_objects=4, seed=0))
    params = dict(model.named_parameters())
    checked = [params["bank.weight"], params["decoder.head.weight"], params["encoder.fusion.excite.weight"]]
    for name in ("bank.weight", "decoder.head.weight", "encoder.fusion.excite.weight"):
        params[name].name = name

    def loss():
        out = model.forward_sequence(sample.frames, sample.flow_images, points)
        return loss_bootstrapped_ce(out.logits[0], sample.masks[0], 1.0) + loss_dice(out.logits[0], sample.masks[0])

    report = grad_check(loss, checked, h=1e-6, tol=1e-3)
    assert report.passed, report.as_dict()


@pytest.mark.slow
def test_memory_invariants_over_random_runs(tiny_config):
    from clickvos.data.scene import gen_sequence, make_specs
    from clickvos.model.abs_net import ABSNet

    model = ABSNet(tiny_config)
    for i, spec in enumerate(make_specs(50, 16, 16, 4, 2, seed=21)):
        sample = gen_sequence(spec)
        points = annotate_first_frame(sample.masks[0], i)
        out = model.forward_sequence(sample.frames, sample.flow_images, points)
        rows = points.num_objects + 1
        for t, step in enumerate(out.trace):
            assert step["dense_slots"] <= 2
            if t:
                assert step["object_rows"] == t * rows
        assert out.memory.keys().shape == out.memory.values().shape
        assert out.memory.object_rows == sample.num_frames * rows


@pytest.fixture(scope="module")
def trained_toy(tmp_path_factory):
    from clickvos.baseline.point_track import run_baseline
    from clickvos.data.scene import gen_sequence, make_specs
    from clickvos.presets import load_preset, resolve_config
    from clickvos.training.trainer import train

    model_config, train_config = resolve_config(overrides=load_preset("toy"))
    train_set = [gen_sequence(s) for s in make_specs(200, 64, 64, 8, 2, seed=100)]
    held_out = [gen_sequence(s) for s in make_specs(20, 64, 64, 8, 2, seed=200, occlusion_every=4)]
    result = train(train_config, train_set, model_config,
                   checkpoint_path=tmp_path_factory.mktemp("toy") / "full.absw")
    return result.model, held_out, run_baseline


@pytest.mark.slow
def test_toy_training_reaches_the_target_score(trained_toy):
    from clickvos.training.trainer import validate_model

    model, held_out, _ = trained_toy
    j, f = validate_model(model, held_out, seed=0)
    assert (j + f) / 2 >= 0.65


@pytest.mark.slow
def test_trained_model_beats_point_tracking(trained_toy):
    from clickvos.evaluation.report import evaluate
    from clickvos.training.trainer import validate_model

    model, held_out, run_baseline = trained_toy
    j, f = validate_model(model, held_out, seed=0)
    pred = {s.name: run_baseline(s, annotate_first_frame(s.masks[0], i)) for i, s in enumerate(held_out)}
    report = evaluate(pred, {s.name: s.masks for s in held_out})
    assert (j + f) / 2 >= report.jf + 0.05


@pytest.mark.slow
def test_trained_model_heals_a_corrupted_first_mask(trained_toy):
    from clickvos.evaluation.selfheal import selfheal_suite

    model, _, _ = trained_toy
    result = selfheal_suite(model, num=10, seed=0, fraction=0.3)
    assert result.healed, result.median_j


@pytest.mark.slow
def test_ablation_grid_keeps_its_ordering(tmp_path):
    import json

    from clickvos.commands.ablate import Ablate
    from clickvos.data.sample_io import write_sample
    from clickvos.data.scene import gen_sequence, make_specs

    for name, specs in (("train", make_specs(200, 64, 64, 8, 2, seed=100)),
                        ("held_out", make_specs(20, 64, 64, 8, 2, seed=200, occlusion_every=4))):
        for spec in specs:
            write_sample(gen_sequence(spec), tmp_path / name / spec.name)
    config = tmp_path / "toy.json"
    config.write_text(json.dumps({"preset": "toy"}), encoding="utf-8")

    rows, _ = Ablate().ablate(data=str(tmp_path / "held_out"), ckpt_dir=str(tmp_path / "grid"),
                              out=str(tmp_path / "ablation.csv"), config=str(config),
                              train_data=str(tmp_path / "train"))
    jf = {(r.modality, r.objmem, r.densemem): r.jf for r in rows}
    full = jf[("bimodal_enhance", "all", "on")]
    object_memory_only = jf[("bimodal_enhance", "all", "off")]
    dense_only = jf[("bimodal_enhance", "first_only", "on")]
    first_frame_only = jf[("bimodal_enhance", "first_only", "off")]

    assert full >= object_memory_only + 0.02
    assert full >= dense_only + 0.02
    assert object_memory_only >= first_frame_only + 0.02
    assert dense_only >= first_frame_only + 0.02
    assert full >= jf[("appearance_only", "all", "on")] + 0.02
