"""Frame sampling, gradients, displaced frame differences and warping.

Frames are plain 2-D ``float64`` arrays indexed ``frame[v, h]``: rows run
along the vertical coordinate ``v`` and columns along the horizontal
coordinate ``h``.  Positions and displacements are ``(h, v)`` pairs.  All
functions accept scalars or broadcastable arrays of coordinates.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_frame, check_mask
from .exceptions import DimensionMismatchError, DomainError

DEFAULT_D_MAX = 15.0


@dataclass(frozen=True, eq=False)
class MotionField:
    """Dense per-pixel displacement field.

    Attributes
    ----------
    vectors : ndarray of shape (height, width, 2)
        ``vectors[..., 0]`` is the horizontal component ``dh`` and
        ``vectors[..., 1]`` the vertical component ``dv``, in pixels.
    valid : ndarray of bool, shape (height, width)
    """

    vectors: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 3 or vectors.shape[2] != 2:
            raise DomainError(f"vectors must have shape (H, W, 2), got {vectors.shape}")
        valid = check_mask(self.valid, vectors.shape[:2], "valid")
        vectors.setflags(write=False)
        valid = valid.copy()
        valid.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "valid", valid)

    @classmethod
    def zeros(cls, shape, valid=True):
        h, w = shape
        return cls(np.zeros((h, w, 2)), np.full((h, w), bool(valid)))

    @classmethod
    def from_components(cls, dh, dv, valid=None):
        dh = np.asarray(dh, dtype=np.float64)
        if valid is None:
            valid = np.ones(dh.shape, dtype=bool)
        return cls(np.stack([dh, np.asarray(dv, dtype=np.float64)], axis=-1), valid)

    @property
    def shape(self):
        return self.valid.shape

    @property
    def dh(self):
        return self.vectors[..., 0]

    @property
    def dv(self):
        return self.vectors[..., 1]

    def within_bound(self, d_max=DEFAULT_D_MAX):
        """True if every valid vector satisfies ``|dh|, |dv| <= d_max``."""
        v = self.vectors[self.valid]
        return bool(np.all(np.abs(v) <= d_max))

    def __eq__(self, other):
        if not isinstance(other, MotionField):
            return NotImplemented
        return bool(
            np.array_equal(self.vectors, other.vectors)
            and np.array_equal(self.valid, other.valid)
        )

    __hash__ = None


def bilinear_sample(frame, h, v):
    """Bilinearly interpolate ``frame`` at ``(h, v)`` with clamp-to-edge."""
    frame = np.asarray(frame, dtype=np.float64)
    height, width = frame.shape
    h = np.clip(np.asarray(h, dtype=np.float64), 0.0, width - 1)
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, height - 1)
    h0 = np.floor(h).astype(np.intp)
    v0 = np.floor(v).astype(np.intp)
    h1 = np.minimum(h0 + 1, width - 1)
    v1 = np.minimum(v0 + 1, height - 1)
    fh = h - h0
    fv = v - v0
    top = frame[v0, h0] * (1.0 - fh) + frame[v0, h1] * fh
    bottom = frame[v1, h0] * (1.0 - fh) + frame[v1, h1] * fh
    out = top * (1.0 - fv) + bottom * fv
    return out[()] if out.ndim == 0 else out


def spatial_gradient(frame, h, v):
    """Return ``(gh, gv)``, the unit-step difference gradient at ``(h, v)``.

    Central differences of the bilinear interpolant are used wherever both
    neighbours lie inside the frame; the step shrinks to a one-sided
    difference at the borders.  Positions are clamped into the frame first.
    """
    frame = np.asarray(frame, dtype=np.float64)
    height, width = frame.shape
    h = np.clip(np.asarray(h, dtype=np.float64), 0.0, width - 1)
    v = np.clip(np.asarray(v, dtype=np.float64), 0.0, height - 1)
    h, v = np.broadcast_arrays(h, v)

    def _diff(lo, hi, sample_lo, sample_hi):
        step = hi - lo
        num = sample_hi - sample_lo
        return np.divide(num, step, out=np.zeros_like(num), where=step > 0)

    hp = np.minimum(h + 1.0, width - 1)
    hm = np.maximum(h - 1.0, 0.0)
    gh = _diff(hm, hp, bilinear_sample(frame, hm, v), bilinear_sample(frame, hp, v))
    vp = np.minimum(v + 1.0, height - 1)
    vm = np.maximum(v - 1.0, 0.0)
    gv = _diff(vm, vp, bilinear_sample(frame, h, vm), bilinear_sample(frame, h, vp))
    if gh.ndim == 0:
        return float(gh), float(gv)
    return gh, gv


def dfd(curr, prev, h, v, dh, dv):
    """Displaced frame difference ``curr(r) - prev(r - d)`` at integer ``r``."""
    curr = np.asarray(curr, dtype=np.float64)
    hi = np.asarray(h)
    vi = np.asarray(v)
    if not (np.all(hi == np.round(hi)) and np.all(vi == np.round(vi))):
        raise DomainError("dfd positions must be integer pixels")
    hi = hi.astype(np.intp)
    vi = vi.astype(np.intp)
    height, width = curr.shape
    if np.any((hi < 0) | (hi >= width) | (vi < 0) | (vi >= height)):
        raise DomainError("dfd position outside the current frame")
    out = curr[vi, hi] - bilinear_sample(prev, hi - np.asarray(dh), vi - np.asarray(dv))
    return out[()] if np.ndim(out) == 0 else out


def warp_frame(prev, field):
    """Motion-compensate ``prev`` with ``field``.

    Each valid pixel ``r`` takes ``prev(r - d(r))``; invalid pixels copy
    ``prev(r)``.
    """
    prev = check_frame(prev, "prev")
    if field.shape != prev.shape:
        raise DimensionMismatchError(
            f"field shape {field.shape} does not match frame shape {prev.shape}"
        )
    vv, hh = np.indices(prev.shape, dtype=np.float64)
    dh = np.where(field.valid, field.dh, 0.0)
    dv = np.where(field.valid, field.dv, 0.0)
    out = bilinear_sample(prev, hh - dh, vv - dv)
    return np.where(field.valid, out, prev)
