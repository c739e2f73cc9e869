"""Semantics of the eight augmentations: stack consistency, determinism,
shape/range contracts, index-level oracles, pipeline grammar."""

import numpy as np
import pytest
from scipy import stats

from stackaug.augment import (
    ColorJitter,
    Crop,
    Cutout,
    DrawPlan,
    Flip,
    Grayscale,
    RandomConv,
    Rotate,
    apply,
    apply_naive,
    format_pipeline,
    kind_name,
    parse_pipeline,
    run_pipeline,
    sample_plan,
)
from stackaug.errors import ConfigError
from stackaug.imagecore import PixelBatch
from stackaug.rng import RngStream

ALL_KINDS = [
    Crop(6, 6),
    Grayscale(p=0.5),
    Cutout(),
    Cutout(fill="color"),
    Flip(p=0.5),
    Rotate(),
    RandomConv(),
    ColorJitter(),
]


def byte_batch(b=8, s=3, c=3, h=10, w=10, seed=0):
    rng = np.random.default_rng(seed)
    return PixelBatch(rng.integers(0, 256, size=(b, s, c, h, w), dtype=np.uint8))


def real_batch(b=8, s=3, c=3, h=10, w=10, seed=0):
    rng = np.random.default_rng(seed)
    return PixelBatch(rng.random((b, s, c, h, w), dtype=np.float32))


def plan_for(kind, batch, seed=0, stage=0):
    return sample_plan(kind, batch.shape, RngStream(seed), stage=stage)


# ------------------------------------------------------------ stack consistency

@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_stack_consistency_identical_frames_stay_identical(kind):
    # when all S frames of an element start equal, a stack-consistent
    # transform must keep them equal
    base = byte_batch(b=16, s=1)
    stacked = PixelBatch(np.repeat(base.data, 4, axis=1))
    out = apply(stacked, kind, plan_for(kind, stacked, seed=3))
    for b in range(out.batch):
        for s in range(1, out.stack):
            assert np.array_equal(out.data[b, s], out.data[b, 0]), (kind, b, s)


@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_plan_has_one_record_per_element(kind):
    batch = byte_batch(b=5)
    plan = plan_for(kind, batch)
    for name, arr in plan.draws.items():
        assert arr.shape[0] == 5, (kind, name)


# ------------------------------------------------------------ shape and range

@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_shape_contract(kind):
    batch = byte_batch(b=4, s=2, h=10, w=10)
    out = apply(batch, kind, plan_for(kind, batch))
    if isinstance(kind, Crop):
        assert out.shape == (4, 2, 3, kind.out_h, kind.out_w)
    else:
        assert out.shape == batch.shape


@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_range_contract_byte_and_real(kind):
    for batch in (byte_batch(b=6), real_batch(b=6)):
        out = apply(batch, kind, plan_for(kind, batch, seed=9))
        if out.is_byte:
            assert out.data.dtype == np.uint8
        else:
            assert out.data.min() >= 0.0 and out.data.max() <= 1.0


def test_input_batch_never_mutated():
    batch = byte_batch(b=4)
    before = batch.data.copy()
    for kind in ALL_KINDS:
        apply(batch, kind, plan_for(kind, batch, seed=1))
    assert np.array_equal(batch.data, before)


# ---------------------------------------------------------------- determinism

def test_plan_byte_identical_across_repeats():
    batch = byte_batch(b=8)
    ref = plan_for(Crop(6, 6), batch, seed=11).tobytes()
    for _ in range(100):
        assert plan_for(Crop(6, 6), batch, seed=11).tobytes() == ref


@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_apply_deterministic_across_three_runs(kind):
    batch = real_batch(b=8)
    outs = [apply(batch, kind, plan_for(kind, batch, seed=5)).data.tobytes() for _ in range(3)]
    assert outs[0] == outs[1] == outs[2]


@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_apply_identical_one_vs_four_workers(kind):
    batch = byte_batch(b=13)  # awkward size so chunks are uneven
    plan = plan_for(kind, batch, seed=7)
    a = apply(batch, kind, plan, workers=1)
    b = apply(batch, kind, plan, workers=4)
    assert a.data.tobytes() == b.data.tobytes()


def test_pipeline_deterministic_across_runs_and_workers():
    batch = byte_batch(b=9, h=12, w=12)
    pipe = parse_pipeline("crop:10x10,grayscale:p=0.5,cutout-color,flip,jitter")
    ref = run_pipeline(batch, pipe, seed=21).data.tobytes()
    assert run_pipeline(batch, pipe, seed=21).data.tobytes() == ref
    assert run_pipeline(batch, pipe, seed=21, workers=4).data.tobytes() == ref
    assert run_pipeline(batch, pipe, seed=22).data.tobytes() != ref


def test_stage_draws_do_not_depend_on_earlier_stages():
    # stage 1 of a two-stage pipeline draws the same values whether or not
    # stage 0 exists: substreams are keyed by position, not by history
    batch = byte_batch(b=6, h=12, w=12)
    solo = sample_plan(Flip(0.5), (6, 3, 3, 12, 12), RngStream(4), stage=1)
    in_pipe = sample_plan(Flip(0.5), (6, 3, 3, 12, 12), RngStream(4), stage=1)
    assert solo.tobytes() == in_pipe.tobytes()


# ------------------------------------------------------- batch stochasticity

def test_crop_offsets_uniform_chi_square():
    # 10k elements, offsets in [0,16] each axis on a 100->84 crop
    plan = sample_plan(Crop(84, 84), (10000, 1, 3, 100, 100), RngStream(123), stage=0)
    for name in ("dy", "dx"):
        counts = np.bincount(plan.draws[name], minlength=17)
        expected = 10000 / 17
        chi2 = ((counts - expected) ** 2 / expected).sum()
        p = stats.chi2.sf(chi2, df=16)
        assert p > 0.001, (name, p)


def test_batch_draws_not_all_equal():
    plan = sample_plan(Crop(6, 6), (256, 3, 3, 10, 10), RngStream(0), stage=0)
    assert len(np.unique(plan.draws["dy"])) > 1


# ------------------------------------------------------------- crop oracles

def test_crop_index_oracle():
    batch = byte_batch(b=4, h=10, w=9)
    plan = plan_for(Crop(5, 4), batch, seed=2)
    out = apply(batch, Crop(5, 4), plan)
    dy, dx = plan.draws["dy"], plan.draws["dx"]
    for b in range(4):
        expect = batch.data[b, :, :, dy[b] : dy[b] + 5, dx[b] : dx[b] + 4]
        assert np.array_equal(out.data[b], expect)


def test_crop_paper_sizes():
    batch = byte_batch(b=2, s=3, h=100, w=100)
    plan = plan_for(Crop(84, 84), batch)
    assert plan.draws["dy"].max() <= 16 and plan.draws["dy"].min() >= 0
    out = apply(batch, Crop(84, 84), plan)
    assert out.shape == (2, 3, 3, 84, 84)


def test_degenerate_crop_is_identity():
    batch = byte_batch(b=5, h=8, w=8)
    plan = plan_for(Crop(8, 8), batch, seed=99)
    assert (plan.draws["dy"] == 0).all() and (plan.draws["dx"] == 0).all()
    assert np.array_equal(apply(batch, Crop(8, 8), plan).data, batch.data)


def test_crop_larger_than_input_rejected():
    with pytest.raises(ConfigError):
        sample_plan(Crop(11, 8), (2, 1, 3, 10, 10), RngStream(0), stage=0)


# -------------------------------------------------------------- flip oracles

def test_flip_index_oracle():
    batch = byte_batch(b=6, w=7)
    plan = plan_for(Flip(1.0), batch)
    out = apply(batch, Flip(1.0), plan)
    assert plan.draws["flag"].all()
    w = batch.width
    for x in range(w):
        assert np.array_equal(out.data[..., x], batch.data[..., w - 1 - x])


def test_flip_involution():
    batch = byte_batch(b=6)
    plan = plan_for(Flip(1.0), batch)
    twice = apply(apply(batch, Flip(1.0), plan), Flip(1.0), plan)
    assert np.array_equal(twice.data, batch.data)


def test_flip_p_zero_identity():
    batch = byte_batch(b=6)
    plan = plan_for(Flip(0.0), batch)
    assert not plan.draws["flag"].any()
    assert np.array_equal(apply(batch, Flip(0.0), plan).data, batch.data)


# ------------------------------------------------------------ rotate oracles

def test_rotate_hand_enumerated_3x3():
    # one quarter-turn clockwise sends source (y,x) to (x, H-1-y):
    #   1 2 3        7 4 1
    #   4 5 6   ->   8 5 2
    #   7 8 9        9 6 3
    frame = np.arange(1, 10, dtype=np.uint8).reshape(1, 1, 1, 3, 3)
    batch = PixelBatch(frame)
    plan = DrawPlan(Rotate(), {"k": np.array([1])})
    out = apply(batch, Rotate(), plan)
    expect = np.array([[7, 4, 1], [8, 5, 2], [9, 6, 3]], dtype=np.uint8)
    assert np.array_equal(out.data[0, 0, 0], expect)


def test_rotate_k0_identity_and_four_turns_identity():
    batch = byte_batch(b=3, h=8, w=8)
    k0 = DrawPlan(Rotate(), {"k": np.zeros(3, dtype=np.int64)})
    assert np.array_equal(apply(batch, Rotate(), k0).data, batch.data)
    k1 = DrawPlan(Rotate(), {"k": np.ones(3, dtype=np.int64)})
    out = batch
    for _ in range(4):
        out = apply(out, Rotate(), k1)
    assert np.array_equal(out.data, batch.data)


def test_rotate_k2_twice_identity():
    batch = byte_batch(b=3, h=8, w=8)
    k2 = DrawPlan(Rotate(), {"k": np.full(3, 2, dtype=np.int64)})
    twice = apply(apply(batch, Rotate(), k2), Rotate(), k2)
    assert np.array_equal(twice.data, batch.data)


def test_rotate_rejects_non_square():
    with pytest.raises(ConfigError):
        sample_plan(Rotate(), (2, 1, 3, 8, 9), RngStream(0), stage=0)


def test_rotate_draws_cover_all_four_turns():
    plan = sample_plan(Rotate(), (1000, 1, 3, 4, 4), RngStream(1), stage=0)
    assert set(np.unique(plan.draws["k"])) == {0, 1, 2, 3}


# --------------------------------------------------------- grayscale oracles

def test_grayscale_flagged_elements_have_equal_channels():
    batch = byte_batch(b=12)
    plan = plan_for(Grayscale(1.0), batch)
    out = apply(batch, Grayscale(1.0), plan)
    assert np.array_equal(out.data[:, :, 0], out.data[:, :, 1])
    assert np.array_equal(out.data[:, :, 1], out.data[:, :, 2])


def test_grayscale_p0_identity():
    batch = byte_batch(b=12)
    plan = plan_for(Grayscale(0.0), batch)
    assert np.array_equal(apply(batch, Grayscale(0.0), plan).data, batch.data)


def test_grayscale_unflagged_untouched():
    batch = byte_batch(b=32)
    plan = plan_for(Grayscale(0.5), batch, seed=6)
    out = apply(batch, Grayscale(0.5), plan)
    flag = plan.draws["flag"]
    assert not flag.all() and flag.any()
    assert np.array_equal(out.data[~flag], batch.data[~flag])


def test_grayscale_flag_rate_binomial_bound():
    # B=10000, p=0.5: observed fraction within 0.5 +/- 0.02 (4 sigma)
    plan = sample_plan(Grayscale(0.5), (10000, 1, 3, 2, 2), RngStream(42), stage=0)
    frac = plan.draws["flag"].mean()
    assert abs(frac - 0.5) < 0.02


def test_grayscale_needs_rgb():
    with pytest.raises(ConfigError):
        sample_plan(Grayscale(0.5), (2, 1, 1, 4, 4), RngStream(0), stage=0)


# ------------------------------------------------------------ cutout oracles

def test_cutout_black_rect_zero_outside_unchanged():
    batch = byte_batch(b=6, h=12, w=12, seed=3)
    plan = plan_for(Cutout(), batch, seed=8)
    out = apply(batch, Cutout(), plan)
    d = plan.draws
    for b in range(6):
        ys = slice(d["y0"][b], d["y0"][b] + d["side_h"][b])
        xs = slice(d["x0"][b], d["x0"][b] + d["side_w"][b])
        assert (out.data[b, :, :, ys, xs] == 0).all()
        mask = np.zeros((12, 12), dtype=bool)
        mask[ys, xs] = True
        assert np.array_equal(out.data[b][:, :, ~mask], batch.data[b][:, :, ~mask])


def test_cutout_rect_always_inside():
    plan = sample_plan(Cutout(0.1, 0.9), (500, 1, 3, 11, 13), RngStream(5), stage=0)
    d = plan.draws
    assert (d["y0"] >= 0).all() and (d["y0"] + d["side_h"] <= 11).all()
    assert (d["x0"] >= 0).all() and (d["x0"] + d["side_w"] <= 13).all()
    assert (d["side_h"] >= 1).all() and (d["side_w"] >= 1).all()


def test_cutout_mean_decreases_on_bright_image():
    bright = PixelBatch(np.full((4, 2, 3, 10, 10), 200, dtype=np.uint8))
    plan = plan_for(Cutout(), bright, seed=1)
    out = apply(bright, Cutout(), plan)
    assert out.data.mean() < bright.data.mean()


def test_cutout_color_same_color_across_stack():
    batch = byte_batch(b=5, s=4)
    kind = Cutout(fill="color")
    plan = plan_for(kind, batch, seed=13)
    out = apply(batch, kind, plan)
    d = plan.draws
    for b in range(5):
        rect = out.data[b, :, :, d["y0"][b], d["x0"][b]]  # (S, C) corner pixel
        assert (rect == rect[0]).all()
        expect = np.floor(d["color"][b] * 255.0 + 0.5).astype(np.uint8)
        assert np.array_equal(rect[0], expect)


def test_cutout_validation():
    with pytest.raises(ConfigError):
        Cutout(0.0, 0.0)
    with pytest.raises(ConfigError):
        Cutout(0.5, 0.2)
    with pytest.raises(ConfigError):
        Cutout(fill="stripes")


# ------------------------------------------------------- random conv oracles

def test_identity_kernel_is_identity():
    batch = byte_batch(b=3)
    k = np.zeros((3, 3, 3, 3, 3))
    for c in range(3):
        k[:, c, c, 1, 1] = 1.0
    out = apply(batch, RandomConv(), DrawPlan(RandomConv(), {"kernel": k}))
    assert np.array_equal(out.data, batch.data)


def test_zero_kernel_gives_zero():
    batch = byte_batch(b=3)
    k = np.zeros((3, 3, 3, 3, 3))
    out = apply(batch, RandomConv(), DrawPlan(RandomConv(), {"kernel": k}))
    assert (out.data == 0).all()


def test_conv_kernel_identical_across_stack_by_construction():
    plan = sample_plan(RandomConv(), (4, 1, 3, 6, 6), RngStream(2), stage=0)
    assert plan.draws["kernel"].shape == (4, 3, 3, 3, 3)


def test_conv_replicate_padding():
    # constant image under an averaging kernel stays constant only when the
    # border replicates; zero padding would dim the edges
    const = PixelBatch(np.full((1, 1, 3, 6, 6), 0.5, dtype=np.float64))
    k = np.full((1, 3, 3, 3, 3), 0.0)
    for o in range(3):
        k[0, o, o] = 1.0 / 9.0
    out = apply(const, RandomConv(), DrawPlan(RandomConv(), {"kernel": k}))
    assert np.allclose(out.data, 0.5)


def test_conv_validation():
    with pytest.raises(ConfigError):
        RandomConv(kernel=4)
    with pytest.raises(ConfigError):
        RandomConv(kernel=0)
    with pytest.raises(ConfigError):
        sample_plan(RandomConv(), (2, 1, 1, 4, 4), RngStream(0), stage=0)


# ------------------------------------------------------------ jitter oracles

def test_jitter_zero_deltas_round_trip_only():
    batch = real_batch(b=4)
    kind = ColorJitter(0.0, 0.0, 0.0)
    out = apply(batch, kind, plan_for(kind, batch))
    assert np.abs(out.data.astype(np.float64) - batch.data.astype(np.float64)).max() <= 1e-6


def test_jitter_grayscale_stays_grayscale_when_sat_fixed():
    gray = np.repeat(np.random.default_rng(0).random((4, 2, 1, 6, 6)), 3, axis=2)
    batch = PixelBatch(gray)
    kind = ColorJitter(hue_delta=0.3, sat_delta=0.0, val_delta=0.3)
    out = apply(batch, kind, plan_for(kind, batch, seed=4))
    assert np.allclose(out.data[:, :, 0], out.data[:, :, 1], atol=1e-9)
    assert np.allclose(out.data[:, :, 1], out.data[:, :, 2], atol=1e-9)


def test_jitter_hue_wraps():
    # pure red (H=0) shifted by a known dh lands on H = dh mod 1
    red = PixelBatch(np.zeros((1, 1, 3, 2, 2)) + np.array([1.0, 0.0, 0.0])[None, None, :, None, None])
    plan = DrawPlan(
        ColorJitter(),
        {
            "dh": np.array([-0.25]),  # wraps to 0.75
            "s_scale": np.ones(1),
            "v_scale": np.ones(1),
        },
    )
    out = apply(red, ColorJitter(), plan)
    from stackaug.imagecore import rgb_to_hsv

    h = rgb_to_hsv(out.data[0, 0])[0]
    assert np.allclose(h, 0.75, atol=1e-9)


def test_jitter_scale_bounds_respected():
    plan = sample_plan(ColorJitter(0.1, 0.4, 0.4), (2000, 1, 3, 2, 2), RngStream(3), stage=0)
    d = plan.draws
    assert (np.abs(d["dh"]) <= 0.1).all()
    assert (d["s_scale"] >= 0.6).all() and (d["s_scale"] <= 1.4).all()
    assert (d["v_scale"] >= 0.6).all() and (d["v_scale"] <= 1.4).all()


def test_jitter_validation():
    with pytest.raises(ConfigError):
        ColorJitter(hue_delta=1.0)
    with pytest.raises(ConfigError):
        sample_plan(ColorJitter(), (2, 1, 1, 4, 4), RngStream(0), stage=0)


# --------------------------------------------------- naive path bitwise parity

@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_naive_matches_batched_bitwise_byte(kind):
    batch = byte_batch(b=5, s=2, h=9, w=9, seed=7)
    plan = plan_for(kind, batch, seed=17)
    assert apply_naive(batch, kind, plan).data.tobytes() == apply(batch, kind, plan).data.tobytes()


@pytest.mark.parametrize("kind", ALL_KINDS, ids=kind_name)
def test_naive_matches_batched_bitwise_real(kind):
    batch = real_batch(b=5, s=2, h=9, w=9, seed=8)
    plan = plan_for(kind, batch, seed=18)
    assert apply_naive(batch, kind, plan).data.tobytes() == apply(batch, kind, plan).data.tobytes()


# ------------------------------------------------------------------ pipeline

def test_empty_pipeline_identity():
    batch = byte_batch(b=4)
    out = run_pipeline(batch, [], seed=0)
    assert np.array_equal(out.data, batch.data)


def test_pipeline_shape_chain():
    batch = byte_batch(b=128, s=3, h=100, w=100)
    out = run_pipeline(batch, [Crop(84, 84)], seed=0)
    assert out.shape == (128, 3, 3, 84, 84)


def test_pipeline_mid_chain_shape_error():
    batch = byte_batch(b=2, h=10, w=10)
    with pytest.raises(ConfigError):
        run_pipeline(batch, [Crop(6, 6), Crop(8, 8)], seed=0)


def test_pipeline_rotate_after_nonsquare_crop_rejected():
    batch = byte_batch(b=2, h=10, w=10)
    with pytest.raises(ConfigError):
        run_pipeline(batch, [Crop(6, 5), Rotate()], seed=0)


def test_plan_batch_mismatch_rejected():
    batch = byte_batch(b=4)
    plan = sample_plan(Flip(0.5), (8, 3, 3, 10, 10), RngStream(0), stage=0)
    with pytest.raises(ConfigError):
        apply(batch, Flip(0.5), plan)


def test_plan_kind_mismatch_rejected():
    batch = byte_batch(b=4)
    plan = plan_for(Flip(0.5), batch)
    with pytest.raises(ConfigError):
        apply(batch, Flip(0.7), plan)


# ------------------------------------------------------------------- grammar

def test_parse_spec_example():
    pipe = parse_pipeline("crop:84x84,grayscale:p=0.3")
    assert pipe == [Crop(84, 84), Grayscale(0.3)]


def test_parse_all_names_with_defaults():
    pipe = parse_pipeline("crop:8,grayscale,cutout,cutout-color,flip,rotate,conv,jitter")
    assert pipe == [
        Crop(8, 8),
        Grayscale(),
        Cutout(),
        Cutout(fill="color"),
        Flip(),
        Rotate(),
        RandomConv(),
        ColorJitter(),
    ]


def test_parse_multi_arg_stage():
    pipe = parse_pipeline("cutout:min=0.2;max=0.5,jitter:h=0.05;s=0.1;v=0.2")
    assert pipe == [Cutout(0.2, 0.5), ColorJitter(0.05, 0.1, 0.2)]


def test_parse_tolerates_whitespace():
    assert parse_pipeline(" crop:84x84 , flip:p=0.5 ") == [Crop(84, 84), Flip(0.5)]


def test_parse_empty_is_empty_pipeline():
    assert parse_pipeline("") == []
    assert parse_pipeline("   ") == []


def test_parse_rejects_unknown_stage():
    with pytest.raises(ConfigError, match="blur"):
        parse_pipeline("blur:3")


def test_parse_rejects_dangling_colon():
    with pytest.raises(ConfigError):
        parse_pipeline("crop:")


def test_parse_rejects_crop_without_size():
    with pytest.raises(ConfigError):
        parse_pipeline("crop")


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError, match="q"):
        parse_pipeline("flip:q=0.5")


def test_parse_rejects_bad_number():
    with pytest.raises(ConfigError):
        parse_pipeline("flip:p=maybe")


def test_parse_rejects_out_of_range_param():
    with pytest.raises(ConfigError):
        parse_pipeline("flip:p=1.5")


def test_format_parse_round_trip():
    pipe = [
        Crop(84, 84),
        Grayscale(0.3),
        Cutout(0.1, 0.3),
        Cutout(0.2, 0.4, fill="color"),
        Flip(0.5),
        Rotate(),
        RandomConv(5),
        ColorJitter(0.1, 0.4, 0.4),
    ]
    assert parse_pipeline(format_pipeline(pipe)) == pipe
