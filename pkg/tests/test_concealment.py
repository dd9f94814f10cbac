import numpy as np
import pytest

from bregconceal.bregman import BregmanConfig
from bregconceal.concealment import (
    LossMask,
    avgn_conceal,
    bregman_conceal,
    conceal_frame,
    copy_conceal,
    damage_frame,
    diffuse_reference,
    refine_field,
    select_alpha,
    simulate_loss,
    zero_fill,
)
from bregconceal.datasets import make_translation_sequence, make_two_region_sequence
from bregconceal.exceptions import DimensionMismatchError, DomainError
from bregconceal.imaging import MotionField
from bregconceal.metrics import psnr
from bregconceal.motion import estimate_field


def test_mask_geometry():
    m = LossMask.for_frame((144, 176), 16, [0, 98])
    assert (m.mb_rows, m.mb_cols) == (9, 11)
    px = m.pixel_mask((144, 176))
    assert px[:16, :16].all() and px[128:, 160:].all()
    assert px.sum() == 2 * 256
    odd = LossMask.for_frame((20, 33), 16, [5])
    assert (odd.mb_rows, odd.mb_cols) == (2, 3)
    assert odd.pixel_mask((20, 33))[16:, 32:].all()
    with pytest.raises(DimensionMismatchError):
        m.pixel_mask((100, 100))
    with pytest.raises(DomainError):
        LossMask.for_frame((32, 32), 16, [4])


def test_simulate_loss_extremes():
    assert simulate_loss(9, 11, 0.0, 3).lost_count == 0
    assert simulate_loss(9, 11, 1.0, 3).lost_count == 99
    with pytest.raises(DomainError):
        simulate_loss(9, 11, 1.5, 0)


def test_simulate_loss_deterministic():
    assert simulate_loss(9, 11, 0.05, 42) == simulate_loss(9, 11, 0.05, 42)
    assert simulate_loss(9, 11, 0.3, 1) != simulate_loss(9, 11, 0.3, 2)


def test_simulate_loss_rate_statistics():
    rates = np.array([simulate_loss(9, 11, 0.05, s).lost.mean() for s in range(10000)])
    mean = rates.mean()
    assert abs(mean - 0.05) <= 0.005
    # binomial standard error over 10000 * 99 draws
    se = np.sqrt(0.05 * 0.95 / (10000 * 99))
    assert abs(mean - 0.05) < 4 * se


def _field(shape, value, valid=True):
    v = np.broadcast_to(np.asarray(value, float), shape + (2,)).copy()
    return MotionField(v, np.full(shape, valid))


def test_avgn_no_loss_unchanged(rng):
    f = MotionField(rng.normal(size=(32, 48, 2)), rng.random((32, 48)) > 0.3)
    assert avgn_conceal(f, LossMask.for_frame((32, 48))) == f


def test_avgn_uniform_neighbours():
    f = _field((48, 48), (2.0, 1.0))
    out = avgn_conceal(f, LossMask.for_frame((48, 48), 16, [4]))
    np.testing.assert_allclose(out.vectors[16:32, 16:32], np.broadcast_to((2.0, 1.0), (16, 16, 2)))


def test_avgn_corner_mean():
    vec = np.zeros((32, 32, 2))
    vec[:16, 16:] = (2.0, 0.0)
    vec[16:, :16] = (0.0, 2.0)
    vec[16:, 16:] = (4.0, 4.0)
    vec[:16, :16] = (9.0, 9.0)  # lost block content is ignored
    f = MotionField(vec, np.ones((32, 32), bool))
    out = avgn_conceal(f, LossMask.for_frame((32, 32), 16, [0]))
    # arithmetic mean of (2,0), (0,2), (4,4)
    np.testing.assert_allclose(out.vectors[:16, :16], np.broadcast_to((2.0, 2.0), (16, 16, 2)))
    np.testing.assert_array_equal(out.vectors[16:], vec[16:])


def test_avgn_skips_lost_and_empty_neighbours():
    vec = np.zeros((48, 16, 2))
    vec[:16] = (3.0, -1.0)
    valid = np.ones((48, 16), bool)
    valid[32:] = False
    out = avgn_conceal(MotionField(vec, valid), LossMask.for_frame((48, 16), 16, [1]))
    np.testing.assert_allclose(out.vectors[16:32], np.broadcast_to((3.0, -1.0), (16, 16, 2)))
    lonely = avgn_conceal(MotionField(vec, np.zeros((48, 16), bool)), LossMask.for_frame((48, 16), 16, [1]))
    np.testing.assert_array_equal(lonely.vectors[16:32], 0.0)
    assert lonely.valid[16:32].all()


def test_copy_conceal_zero_vectors():
    m = LossMask.for_frame((32, 48), 16, [1, 4])
    f = copy_conceal(m, (32, 48))
    np.testing.assert_array_equal(f.vectors, 0.0)
    np.testing.assert_array_equal(f.valid, m.pixel_mask((32, 48)))


def test_copy_conceal_static_and_moving(texture64):
    m = LossMask.for_frame((64, 64), 16, [5, 10])
    lost = m.pixel_mask((64, 64))
    out = conceal_frame(damage_frame(texture64, m), texture64, copy_conceal(m, (64, 64)), m)
    np.testing.assert_array_equal(out, texture64)
    frames, _ = make_translation_sequence((64, 64), 2, (3.0, 0.0), seed=2)
    out = conceal_frame(damage_frame(frames[1], m), frames[0], copy_conceal(m, (64, 64)), m)
    np.testing.assert_allclose(out[lost] - frames[1][lost], frames[0][lost] - frames[1][lost])


def test_conceal_frame_no_loss(texture64):
    m = LossMask.for_frame((64, 64))
    f = MotionField(np.full((64, 64, 2), 1.5), np.ones((64, 64), bool))
    np.testing.assert_array_equal(conceal_frame(texture64, texture64 * 0.5, f, m), texture64)


def test_conceal_frame_true_field_restores_lost_blocks():
    frames, truth = make_translation_sequence((64, 80), 2, (2.0, -1.0), seed=4)
    m = LossMask.for_frame((64, 80), 16, [6, 8])
    lost = m.pixel_mask((64, 80))
    out = conceal_frame(damage_frame(frames[1], m), frames[0], MotionField(truth, np.ones((64, 80), bool)), m)
    assert psnr(frames[1][lost], out[lost]) >= 35.0
    np.testing.assert_array_equal(out[~lost], frames[1][~lost])


def test_zero_fill():
    f = np.full((32, 32), 9.0)
    m = LossMask.for_frame((32, 32), 16, [3])
    out = zero_fill(f, m)
    assert out[16:, 16:].max() == 0 and out[:16].min() == 9


def test_diffuse_reference():
    values = np.zeros((5, 5))
    known = np.zeros((5, 5), bool)
    values[:, 0] = 4.0
    known[:, 0] = True
    ref = diffuse_reference(values, known, 1.0)
    np.testing.assert_allclose(ref, 4.0)
    np.testing.assert_array_equal(diffuse_reference(values, np.zeros((5, 5), bool), 7.0), 7.0)
    values[2, 0] = 10.0
    ref = diffuse_reference(values, known, 1.0)
    assert ref[2, 0] == pytest.approx(6.0)  # mean of 4, 10, 4


def test_bregman_conceal_static_no_loss(texture64):
    m = LossMask.for_frame((64, 64))
    field, result = bregman_conceal(texture64, texture64, m)
    np.testing.assert_allclose(field.vectors, 0.0, atol=1e-9)
    assert field.valid.all()
    assert result.final_q == pytest.approx(0.0, abs=1e-9)


def test_bregman_conceal_global_translation():
    frames, _ = make_translation_sequence((96, 96), 2, (2.0, 0.0), seed=8)
    m = LossMask.for_frame((96, 96), 16, [14, 21])
    field, result = bregman_conceal(damage_frame(frames[1], m), frames[0], m)
    lost = m.pixel_mask((96, 96))
    np.testing.assert_allclose(field.vectors[lost], np.broadcast_to((2.0, 0.0), (lost.sum(), 2)), atol=0.5)
    assert result.converged
    assert field.within_bound(15.0)


def test_bregman_conceal_two_regions():
    frames, truth = make_two_region_sequence((96, 128), 2, seed=9)
    m = LossMask.for_frame((96, 128), 16, [17, 22])  # (2, 1) left, (2, 6) right
    field, _ = bregman_conceal(damage_frame(frames[1], m), frames[0], m)
    lost = m.pixel_mask((96, 128))
    assert np.max(np.abs(field.vectors[lost] - truth[lost])) <= 0.5


def test_bregman_small_alpha_keeps_ols_estimates(texture64):
    from conftest import shifted_pair

    prev, curr = shifted_pair(np.pad(texture64, 8, mode="reflect"), (48, 48), (1, -1))
    m = LossMask.for_frame((48, 48))
    est = estimate_field(curr, prev)
    res = refine_field(est, BregmanConfig(alpha=1e-6))
    diff = np.abs(res.field.vectors - est.vectors)[est.valid]
    assert diff.max() <= 1e-3
    assert bregman_conceal(curr, prev, m, breg_cfg=BregmanConfig(alpha=1e-6))[0] == res.field


def test_select_alpha_single_candidate(texture64):
    m = LossMask.for_frame((64, 64), 16, [5])
    best, scores = select_alpha(texture64, texture64, m, alpha_grid=[3.0])
    assert best == 3.0 and list(scores) == [3.0]
    with pytest.raises(DomainError):
        select_alpha(texture64, texture64, m, alpha_grid=[])


def test_select_alpha_prefers_larger_on_ties(texture64):
    m = LossMask.for_frame((64, 64), 16, [5])
    best, scores = select_alpha(texture64, texture64, m, alpha_grid=[0.1, 1.0, 10.0])
    assert len(set(scores.values())) == 1
    assert best == 10.0
