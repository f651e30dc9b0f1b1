import numpy as np
import pytest

from clickvos.annotation.points import Point, PointSet, annotate_first_frame
from clickvos.engine import functional as F
from clickvos.engine.layers import make_generator
from clickvos.errors import ConfigError, ModelStateError, ShapeError
from clickvos.model.abs_net import ABSNet, load_model, save_model
from clickvos.model.config import MODALITIES, ModelConfig
from clickvos.model.decoder import Decoder, decode_mask, labels_from_logits
from clickvos.model.encoder import BimodalEncoder, ModalEnhanceBlock
from clickvos.model.memory import MemoryState, memory_update
from clickvos.model.segment_attention import SegmentAttention
from clickvos.model.tokens import (
    DenseTokens,
    IdentityBank,
    TokenSet,
    downsample_mask,
    make_dense_tokens,
    mask_pool,
    point_tokenize,
)


def _tokens(rows, channels=8, value=0.0, ids=None):
    z = F.constant(np.full((rows, channels), value))
    return TokenSet(z, z, ids or list(range(rows)), [False] * rows)


def _dense(rows, channels=8, value=0.0):
    z = F.constant(np.full((rows, channels), value))
    return DenseTokens(z, z, np.zeros(rows, dtype=np.int64))


@pytest.mark.parametrize("modality", MODALITIES)
def test_encoder_output_shape_for_every_modality(tiny_config, tiny_sample, modality):
    config = tiny_config.replace(modality=modality)
    encoder = BimodalEncoder(config, make_generator(0))
    fmap = encoder(tiny_sample.frames[0], tiny_sample.flow_images[0])
    assert fmap.features.shape == [8, 4, 4]
    assert np.isfinite(fmap.features.numpy()).all()


def test_bimodal_encoder_keeps_stage_intermediates(tiny_config, tiny_sample):
    fmap = BimodalEncoder(tiny_config, make_generator(0))(tiny_sample.frames[0], tiny_sample.flow_images[0])
    assert fmap.intermediates["image_flow1"].shape == [4, 8, 8]
    assert fmap.intermediates["flow_image2"].shape == [8, 4, 4]


def test_encoder_rejects_sizes_not_divisible_by_the_stride(tiny_config):
    encoder = BimodalEncoder(tiny_config, make_generator(0))
    with pytest.raises(ConfigError):
        encoder(np.zeros((18, 16, 3)), np.zeros((18, 16, 3)))
    with pytest.raises(ConfigError):
        encoder(np.zeros((16, 16, 3)), np.zeros((8, 8, 3)))


def test_point_tokens_follow_object_id_order(rng):
    fmap = F.constant(rng.normal(size=(8, 4, 4)))
    bank = IdentityBank(4, 8, make_generator(0))
    points = PointSet([Point(13, 2, 2), Point(0, 0, 0), Point(5, 9, 1)])
    tokens = point_tokenize(fmap, points, bank, stride=4)
    assert tokens.ids == [0, 1, 2]
    grid = fmap.numpy()
    np.testing.assert_allclose(tokens.z.numpy(), [grid[:, 0, 0], grid[:, 2, 1], grid[:, 0, 3]])
    np.testing.assert_allclose(tokens.z_id.numpy() - tokens.z.numpy(), bank.weight.numpy()[:3])


def test_point_outside_the_map_is_a_shape_error(rng):
    fmap = F.constant(rng.normal(size=(8, 4, 4)))
    bank = IdentityBank(4, 8, make_generator(0))
    with pytest.raises(ShapeError):
        point_tokenize(fmap, PointSet([Point(0, 0, 0), Point(16, 0, 1)]), bank, stride=4)


def test_identity_bank_rejects_ids_beyond_its_size():
    bank = IdentityBank(3, 8, make_generator(0))
    with pytest.raises(ConfigError):
        bank.rows([0, 3])


def test_downsample_mask_takes_the_majority_with_low_ties():
    mask = np.array([
        [1, 1, 0, 0],
        [2, 2, 3, 3],
        [0, 3, 2, 2],
        [3, 3, 2, 0],
    ])
    np.testing.assert_array_equal(downsample_mask(mask, 2), [[1, 0], [3, 2]])
    with pytest.raises(ConfigError):
        downsample_mask(np.zeros((5, 4)), 2)


def test_mask_pool_is_the_mean_under_each_object(rng):
    fmap = F.constant(rng.normal(size=(8, 4, 4)))
    bank = IdentityBank(4, 8, make_generator(0))
    mask = np.zeros((16, 16), dtype=np.uint8)
    mask[0:8, 0:8] = 1
    mask[8:12, 8:16] = 2
    pooled = mask_pool(fmap, mask, bank, stride=4, ids=[0, 1, 2, 3])

    cells = downsample_mask(mask, 4).reshape(-1)
    grid = fmap.numpy().reshape(8, -1).T
    for row, oid in enumerate([0, 1, 2]):
        np.testing.assert_allclose(pooled.z.numpy()[row], grid[cells == oid].mean(axis=0))
    np.testing.assert_array_equal(pooled.z.numpy()[3], np.zeros(8))
    assert pooled.absent == [False, False, False, True]


def test_dense_tokens_carry_the_downsampled_labels(rng, tiny_sample):
    fmap = F.constant(rng.normal(size=(8, 4, 4)))
    bank = IdentityBank(4, 8, make_generator(0))
    dense = make_dense_tokens(fmap, tiny_sample.masks[0], bank, stride=4)
    assert dense.rows == 16
    np.testing.assert_array_equal(dense.labels, downsample_mask(tiny_sample.masks[0], 4).reshape(-1))
    np.testing.assert_allclose(dense.z_id.numpy() - dense.z.numpy(), bank.weight.numpy()[dense.labels])


def test_segment_attention_needs_memory(rng):
    attention = SegmentAttention(8, 2, make_generator(0))
    fmap = F.constant(rng.normal(size=(8, 4, 4)))
    with pytest.raises(ModelStateError):
        attention(fmap, None, None)
    with pytest.raises(ShapeError):
        attention(fmap, F.constant(np.ones((3, 8))), F.constant(np.ones((4, 8))))
    out = attention(fmap, F.constant(np.ones((3, 8))), F.constant(np.ones((3, 8))))
    assert out.shape == [8, 4, 4]


def test_duplicated_memory_leaves_segment_attention_unchanged(rng):
    attention = SegmentAttention(8, 2, make_generator(0))
    fmap = F.constant(rng.normal(size=(8, 4, 4)))
    keys, values = rng.normal(size=(5, 8)), rng.normal(size=(5, 8))
    once = attention(fmap, F.constant(keys), F.constant(values)).numpy()
    doubled = attention(fmap, F.constant(np.concatenate([keys, keys])),
                        F.constant(np.concatenate([values, values]))).numpy()
    np.testing.assert_allclose(doubled, once, rtol=0, atol=1e-9)


def test_modal_enhance_swaps_roles_under_tied_weights(rng):
    blocks = [ModalEnhanceBlock(8, 2, make_generator(seed)) for seed in (0, 1)]
    for block in blocks:
        block.flow_self.load_state_dict(block.image_self.state_dict())
        block.flow_norm.load_state_dict(block.image_norm.state_dict())
        block.flow_from_image.load_state_dict(block.image_from_flow.state_dict())

    def run(image, flow):
        for block in blocks:
            out = block(image, flow)
            image, flow = out["image_flow"], out["flow_image"]
        return image.numpy(), flow.numpy()

    a, b = F.constant(rng.normal(size=(8, 4, 4))), F.constant(rng.normal(size=(8, 4, 4)))
    io, oi = run(a, b)
    swapped_io, swapped_oi = run(b, a)
    np.testing.assert_allclose(swapped_io, oi, rtol=0, atol=1e-12)
    np.testing.assert_allclose(swapped_oi, io, rtol=0, atol=1e-12)
    assert not np.allclose(io, oi)


def test_decoder_restores_full_resolution(tiny_config, rng):
    decoder = Decoder(tiny_config, make_generator(0))
    e, f = F.constant(rng.normal(size=(8, 4, 4))), F.constant(rng.normal(size=(8, 4, 4)))
    logits, labels = decode_mask(decoder, e, f, labels=[0, 2])
    assert logits.shape == [4, 16, 16]
    assert set(np.unique(labels).tolist()) <= {0, 2}
    with pytest.raises(ShapeError):
        decoder(e, F.constant(np.ones((8, 2, 2))))


def test_labels_from_logits_breaks_ties_toward_the_lower_label():
    logits = np.zeros((4, 2, 2))
    np.testing.assert_array_equal(labels_from_logits(logits, [2, 1]), np.ones((2, 2)))
    logits[3, 0, 0] = 5.0
    assert labels_from_logits(logits)[0, 0] == 3
    assert labels_from_logits(logits, [0, 1])[0, 0] == 0


def test_object_memory_replaces_the_point_seed_then_appends():
    mem = MemoryState.seeded(_tokens(3), objmem="all", dense_enabled=False)
    first = memory_update(mem, _tokens(3, value=1.0))
    assert len(mem.objects) == 1
    assert first.objects[0].z.numpy()[0, 0] == 1.0
    second = memory_update(first, _tokens(3, value=2.0))
    assert [t.z.numpy()[0, 0] for t in second.objects] == [1.0, 2.0]
    assert second.frames == 2


def test_first_only_memory_never_changes():
    seed = _tokens(3)
    mem = MemoryState.seeded(seed, objmem="first_only", dense_enabled=False)
    for value in (1.0, 2.0, 3.0):
        mem = memory_update(mem, _tokens(3, value=value))
    assert mem.objects == [seed]
    assert mem.key_rows == 3


def test_dense_memory_keeps_the_first_slot_and_overwrites_the_previous():
    mem = MemoryState.seeded(_tokens(3), objmem="all", dense_enabled=True)
    slots = [_dense(16, value=v) for v in (1.0, 2.0, 3.0)]
    mem = memory_update(mem, _tokens(3), slots[0])
    assert mem.dense_first is slots[0] and mem.dense_previous is slots[0]
    mem = memory_update(mem, _tokens(3), slots[1])
    mem = memory_update(mem, _tokens(3), slots[2])
    assert mem.dense_first is slots[0] and mem.dense_previous is slots[2]
    assert mem.key_rows == 3 * 3 + 2 * 16
    np.testing.assert_array_equal(mem.values().numpy()[9 + 16:], np.full((16, 8), 3.0))


def test_dense_memory_off_ignores_dense_tokens():
    mem = MemoryState.seeded(_tokens(3), objmem="all", dense_enabled=False)
    mem = memory_update(mem, _tokens(3), _dense(16))
    assert mem.dense_slots == []


def test_forward_sequence_memory_growth(tiny_config, square_spec):
    from clickvos.data.scene import gen_sequence

    sample = gen_sequence(square_spec(frames=5))
    points = annotate_first_frame(sample.masks[0], seed=0)
    model = ABSNet(tiny_config)
    out = model.infer_video(sample, points)
    rows_per_frame = points.num_objects + 1
    hw = 16
    assert [step["key_rows"] for step in out.trace] == [
        rows_per_frame,
        rows_per_frame + 2 * hw,
        2 * rows_per_frame + 2 * hw,
        3 * rows_per_frame + 2 * hw,
        4 * rows_per_frame + 2 * hw,
    ]
    assert out.masks.shape == (5, 16, 16)
    assert out.masks.dtype == np.uint8
    assert set(np.unique(out.masks).tolist()) <= {0, 1, 2}


def test_forward_sequence_final_memory_counts(tiny_config, square_spec):
    from clickvos.data.scene import gen_sequence

    sample = gen_sequence(square_spec(frames=5))
    points = annotate_first_frame(sample.masks[0], seed=0)
    out = ABSNet(tiny_config).forward_sequence(sample.frames, sample.flow_images, points)
    assert out.memory.key_rows == 5 * 3 + 2 * 16

    first_only = ABSNet(tiny_config.replace(objmem="first_only", densemem="off"))
    out = first_only.forward_sequence(sample.frames, sample.flow_images, points)
    assert out.memory.key_rows == 3
    assert all(step["key_rows"] == 3 for step in out.trace)


def test_infer_video_is_deterministic_and_records_nothing(tiny_config, tiny_sample, fresh_graph):
    points = annotate_first_frame(tiny_sample.masks[0], seed=1)
    model = ABSNet(tiny_config)
    a = model.infer_video(tiny_sample, points)
    b = ABSNet(tiny_config).infer_video(tiny_sample, points)
    np.testing.assert_array_equal(a.masks, b.masks)
    assert fresh_graph.nodes == []


def test_first_mask_override_only_changes_memory(tiny_config, tiny_sample):
    points = annotate_first_frame(tiny_sample.masks[0], seed=1)
    model = ABSNet(tiny_config)
    plain = model.infer_video(tiny_sample, points)
    healed = model.infer_video(tiny_sample, points, first_mask_override=tiny_sample.masks[0])
    np.testing.assert_array_equal(plain.masks[0], healed.masks[0])


def test_model_rejects_points_beyond_max_objects(tiny_config, tiny_sample):
    model = ABSNet(tiny_config)
    points = PointSet([Point(0, 0, 0), Point(3, 3, 4)])
    with pytest.raises(ConfigError):
        model.infer_video(tiny_sample, points)
    with pytest.raises(ConfigError):
        model.infer_video(tiny_sample, PointSet([Point(3, 3, 1)]))


def test_saved_model_reloads_with_memory_overrides(tmp_path, tiny_config, tiny_sample):
    model = ABSNet(tiny_config.replace(seed=3))
    path = save_model(model, tmp_path / "model.absw")
    loaded = load_model(path, objmem="first_only", densemem=None)
    assert loaded.config.objmem == "first_only"
    assert loaded.config.densemem == "on"
    assert loaded.config.seed == 3
    for (name, a), (_, b) in zip(model.named_parameters(), loaded.named_parameters()):
        np.testing.assert_array_equal(a.numpy(), b.numpy(), err_msg=name)

    points = annotate_first_frame(tiny_sample.masks[0], seed=0)
    same = load_model(path)
    np.testing.assert_array_equal(model.infer_video(tiny_sample, points).masks,
                                  same.infer_video(tiny_sample, points).masks)


def test_model_config_validation_and_coercion():
    config = ModelConfig.from_dict({"channels": "16", "n_heads": 2.0, "modality": "concat_fuse"})
    assert (config.channels, config.n_heads, config.modality) == (16, 2, "concat_fuse")
    for bad in ({"channels": 7}, {"n_heads": 3}, {"stride": 6}, {"max_objects": 1},
                {"modality": "rgb"}, {"channels": 1.5}, {"bogus": 1}):
        with pytest.raises(ConfigError):
            ModelConfig.from_dict(bad)
    assert ModelConfig.from_dict({"bogus": 1}, strict=False) == ModelConfig()
