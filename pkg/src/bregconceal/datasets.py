"""Seeded synthetic sequences with known motion."""

import numpy as np
from scipy.ndimage import gaussian_filter

from .imaging import bilinear_sample


def make_texture(shape, sigma=4.0, seed=0, low=20.0, high=235.0):
    """Smooth random texture scaled to ``[low, high]``."""
    rng = np.random.default_rng(seed)
    tex = gaussian_filter(rng.normal(size=shape), sigma, mode="reflect")
    tex -= tex.min()
    tex /= tex.max()
    return low + (high - low) * tex


def _translate(canvas, shape, pad, k, motion):
    vv, hh = np.indices(shape, dtype=np.float64)
    return bilinear_sample(canvas, hh + pad - k * motion[0], vv + pad - k * motion[1])


def make_translation_sequence(
    shape=(144, 176), n_frames=30, motion=(2.0, 0.0), sigma=4.0, noise=0.0, seed=0,
):
    """Frames of one texture translating by ``motion = (dh, dv)`` per frame.

    Frame ``k`` satisfies ``frame[k](r) = frame[k-1](r - motion)``.
    Returns ``(frames, true_field)`` where ``true_field`` has shape
    ``shape + (2,)``.
    """
    pad = int(np.ceil(np.abs(motion).max() * n_frames)) + 2
    canvas = make_texture((shape[0] + 2 * pad, shape[1] + 2 * pad), sigma, seed)
    rng = np.random.default_rng(seed + 1)
    frames = []
    for k in range(n_frames):
        f = _translate(canvas, shape, pad, k, motion)
        if noise:
            f = f + rng.normal(scale=noise, size=shape)
        frames.append(f)
    truth = np.broadcast_to(np.asarray(motion, dtype=np.float64), tuple(shape) + (2,)).copy()
    return frames, truth


def make_two_region_sequence(
    shape=(144, 176), n_frames=30, motions=((2.0, 0.0), (-1.0, 1.0)), split=None,
    sigma=4.0, noise=0.0, seed=0,
):
    """Left and right halves sliding with different motions.

    The boundary column ``split`` (default ``width // 2``) is fixed; each
    side shows its own texture.  Returns ``(frames, true_field)``.
    """
    split = shape[1] // 2 if split is None else split
    left = make_translation_sequence(shape, n_frames, motions[0], sigma, 0.0, seed)[0]
    right = make_translation_sequence(shape, n_frames, motions[1], sigma, 0.0, seed + 7)[0]
    rng = np.random.default_rng(seed + 1)
    frames = []
    for a, b in zip(left, right):
        f = np.concatenate([a[:, :split], b[:, split:]], axis=1)
        if noise:
            f = f + rng.normal(scale=noise, size=shape)
        frames.append(f)
    truth = np.empty(tuple(shape) + (2,))
    truth[:, :split] = motions[0]
    truth[:, split:] = motions[1]
    return frames, truth
