"""Dense pixel-recursive motion estimation.

For every pixel a window of linearized brightness-constancy equations
``y = H x`` is assembled around the current displacement prediction and
the update ``x`` is the ordinary least-squares solution of the 2x2 normal
equations.  Updates are accumulated until they fall below a hundredth of a
pixel.  The per-pixel recursion is evaluated for all pixels at once with
array arithmetic; :func:`refine_dv` is the single-pixel view of it.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_frame, check_mask, check_same_shape
from .exceptions import DegenerateSystemError, DomainError
from .imaging import DEFAULT_D_MAX, MotionField, bilinear_sample, spatial_gradient

CONDITION_MAX = 1e8
STEP_TOL = 0.01


@dataclass(frozen=True)
class EstimationConfig:
    window_half: int = 2
    max_refinements: int = 10
    min_gradient_energy: float = 1e-4
    d_max: float = DEFAULT_D_MAX

    def __post_init__(self):
        if self.window_half < 1:
            raise DomainError("window_half must be >= 1")
        if self.max_refinements < 1:
            raise DomainError("max_refinements must be >= 1")
        if not (self.min_gradient_energy > 0 and self.d_max > 0):
            raise DomainError("min_gradient_energy and d_max must be > 0")

    def offsets(self):
        n = self.window_half
        return [(dv, dh) for dv in range(-n, n + 1) for dh in range(-n, n + 1)]


@dataclass(frozen=True, eq=False)
class ObservationSystem:
    """Stacked window equations ``y = H x + noise`` around one pixel.

    Rows of ``H`` are ``(gh, gv)`` gradients of the previous frame at the
    motion-compensated window positions; ``y`` holds the matching temporal
    differences ``prev(p - d) - curr(p)``, so that ``x`` is the correction
    to add to the predicted displacement.
    """

    y: np.ndarray
    H: np.ndarray
    window_half: int
    center: tuple


def build_observation(curr, prev, center, dv_pred, cfg=EstimationConfig(), row_mask=None):
    """Assemble the window system at integer ``center = (h, v)``.

    Window pixels outside ``curr`` are dropped, as are pixels where
    ``row_mask`` is False (damaged data).  Sample positions in ``prev`` are
    clamped to the frame.
    """
    curr = check_frame(curr, "curr")
    prev = check_frame(prev, "prev")
    check_same_shape(curr, prev, names=("curr", "prev"))
    height, width = curr.shape
    h, v = int(center[0]), int(center[1])
    if not (0 <= h < width and 0 <= v < height):
        raise DomainError(f"center {center} lies outside the frame")
    if row_mask is not None:
        row_mask = check_mask(row_mask, curr.shape, "row_mask")
    ys, rows = [], []
    for ov, oh in cfg.offsets():
        ph, pv = h + oh, v + ov
        if not (0 <= ph < width and 0 <= pv < height):
            continue
        if row_mask is not None and not row_mask[pv, ph]:
            continue
        sh, sv = ph - dv_pred[0], pv - dv_pred[1]
        ys.append(bilinear_sample(prev, sh, sv) - curr[pv, ph])
        rows.append(spatial_gradient(prev, sh, sv))
    return ObservationSystem(
        y=np.asarray(ys, dtype=np.float64),
        H=np.asarray(rows, dtype=np.float64).reshape(-1, 2),
        window_half=cfg.window_half,
        center=(h, v),
    )


def _solve_normal(a, b, c, rh, rv):
    """Solve ``[[a, b], [b, c]] x = (rh, rv)`` elementwise.

    Returns ``(xh, xv, ok)`` where ``ok`` is False for singular or
    ill-conditioned systems.
    """
    det = a * c - b * b
    half_tr = 0.5 * (a + c)
    disc = np.sqrt(np.maximum(half_tr**2 - det, 0.0))
    lam_max = half_tr + disc
    lam_min = half_tr - disc
    ok = (det > 0) & (lam_min > 0) & (lam_max < CONDITION_MAX * np.maximum(lam_min, 0.0))
    safe = np.where(ok, det, 1.0)
    xh = np.where(ok, (c * rh - b * rv) / safe, 0.0)
    xv = np.where(ok, (a * rv - b * rh) / safe, 0.0)
    return xh, xv, ok


def ols_update(obs):
    """Least-squares displacement correction ``(H^T H)^-1 H^T y``."""
    H = np.asarray(obs.H, dtype=np.float64)
    y = np.asarray(obs.y, dtype=np.float64)
    if H.shape[0] < 2:
        raise DegenerateSystemError(f"need at least 2 observations, got {H.shape[0]}")
    a = H[:, 0] @ H[:, 0]
    b = H[:, 0] @ H[:, 1]
    c = H[:, 1] @ H[:, 1]
    xh, xv, ok = _solve_normal(a, b, c, H[:, 0] @ y, H[:, 1] @ y)
    if not ok:
        raise DegenerateSystemError("normal equations are singular or ill-conditioned")
    return float(xh), float(xv)


def _refine_many(curr, prev, hs, vs, d0h, d0v, cfg, row_mask):
    """Vectorized pixel recursion for integer centres ``(hs, vs)``.

    Returns ``(dh, dv, converged)``.  Pixels whose first system is
    degenerate keep their initial vector.
    """
    height, width = curr.shape
    dh = np.array(d0h, dtype=np.float64)
    dv = np.array(d0v, dtype=np.float64)
    converged = np.zeros(hs.shape, dtype=bool)
    active = np.ones(hs.shape, dtype=bool)
    offsets = cfg.offsets()
    for _ in range(cfg.max_refinements):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        h, v = hs[idx], vs[idx]
        ch, cv = dh[idx], dv[idx]
        a = np.zeros(idx.size)
        b = np.zeros(idx.size)
        c = np.zeros(idx.size)
        rh = np.zeros(idx.size)
        rv = np.zeros(idx.size)
        count = np.zeros(idx.size, dtype=np.intp)
        for ov, oh in offsets:
            ph, pv = h + oh, v + ov
            inside = (ph >= 0) & (ph < width) & (pv >= 0) & (pv < height)
            php = np.clip(ph, 0, width - 1)
            pvp = np.clip(pv, 0, height - 1)
            if row_mask is not None:
                inside &= row_mask[pvp, php]
            sh, sv = ph - ch, pv - cv
            y = bilinear_sample(prev, sh, sv) - curr[pvp, php]
            gh, gv = spatial_gradient(prev, sh, sv)
            w = inside.astype(np.float64)
            gh = gh * w
            gv = gv * w
            a += gh * gh
            b += gh * gv
            c += gv * gv
            rh += gh * y
            rv += gv * y
            count += inside
        xh, xv, ok = _solve_normal(a, b, c, rh, rv)
        ok &= (count >= 2) & (a + c >= cfg.min_gradient_energy)
        # degenerate: stop refining, keep the current vector, not converged
        active[idx[~ok]] = False
        good = idx[ok]
        xh, xv = xh[ok], xv[ok]
        dh[good] = np.clip(dh[good] + xh, -cfg.d_max, cfg.d_max)
        dv[good] = np.clip(dv[good] + xv, -cfg.d_max, cfg.d_max)
        done = np.hypot(xh, xv) < STEP_TOL
        converged[good[done]] = True
        active[good[done]] = False
    return dh, dv, converged


def refine_dv(curr, prev, center, d0=(0.0, 0.0), cfg=EstimationConfig(), row_mask=None):
    """Iteratively refine the displacement at integer ``center = (h, v)``.

    Returns ``((dh, dv), converged)``.  ``center`` and ``d0`` may also hold
    equal-length arrays, in which case every returned item is an array and
    all pixels are refined together.
    """
    curr = check_frame(curr, "curr")
    prev = check_frame(prev, "prev")
    check_same_shape(curr, prev, names=("curr", "prev"))
    h = np.asarray(center[0])
    v = np.asarray(center[1])
    scalar = h.ndim == 0
    h, v = np.broadcast_arrays(np.atleast_1d(h), np.atleast_1d(v))
    if np.any(h != np.round(h)) or np.any(v != np.round(v)):
        raise DomainError("centers must be integer pixels")
    h = h.astype(np.intp)
    v = v.astype(np.intp)
    height, width = curr.shape
    if np.any((h < 0) | (h >= width) | (v < 0) | (v >= height)):
        raise DomainError("center lies outside the frame")
    if row_mask is not None:
        row_mask = check_mask(row_mask, curr.shape, "row_mask")
    d0h = np.broadcast_to(np.asarray(d0[0], dtype=np.float64), h.shape)
    d0v = np.broadcast_to(np.asarray(d0[1], dtype=np.float64), h.shape)
    dh, dv, conv = _refine_many(curr, prev, h, v, d0h, d0v, cfg, row_mask)
    if scalar:
        return (float(dh[0]), float(dv[0])), bool(conv[0])
    return (dh, dv), conv


def estimate_field(curr, prev, legit=None, cfg=EstimationConfig()):
    """Dense motion field from the legitimate pixels of ``curr``.

    Every legitimate pixel is refined from the zero vector using only
    legitimate window pixels.  Lost, degenerate and non-converged pixels
    get ``valid=False`` and a zero vector.
    """
    curr = check_frame(curr, "curr")
    prev = check_frame(prev, "prev")
    check_same_shape(curr, prev, names=("curr", "prev"))
    legit = np.ones(curr.shape, dtype=bool) if legit is None else check_mask(legit, curr.shape, "legit")
    vs, hs = np.nonzero(legit)
    dh = np.zeros(curr.shape)
    dv = np.zeros(curr.shape)
    valid = np.zeros(curr.shape, dtype=bool)
    if hs.size:
        zeros = np.zeros(hs.size)
        eh, ev, conv = _refine_many(curr, prev, hs, vs, zeros, zeros, cfg, legit)
        dh[vs, hs] = np.where(conv, eh, 0.0)
        dv[vs, hs] = np.where(conv, ev, 0.0)
        valid[vs, hs] = conv
    return MotionField.from_components(dh, dv, valid)
