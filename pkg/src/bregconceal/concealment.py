"""Macroblock loss simulation and temporal error concealment.

Methods
-------
``bregman``
    Motion estimated on legitimate pixels is refined and in-filled over the
    whole frame by the Bregman-regularized solver, then lost macroblocks are
    motion compensated from the previous frame.
``avgn``
    Lost macroblocks take the mean of their available neighbours' mean
    motion vectors.
``copy``
    Zero motion, i.e. the co-located block of the previous frame.
``zero-fill``
    Lost pixels stay at zero.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.ndimage import uniform_filter

from ._validation import check_frame, check_mask, check_same_shape
from .bregman import BregmanConfig, RegularizedProblem, newton_solve
from .exceptions import DimensionMismatchError, DomainError
from .imaging import MotionField, bilinear_sample, warp_frame
from .motion import EstimationConfig, estimate_field

METHODS = ("bregman", "avgn", "copy", "zero-fill")
DEFAULT_ALPHA_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
HOLDOUT_FRACTION = 0.1


@dataclass(frozen=True, eq=False)
class LossMask:
    """Lost/received status per macroblock address (row-major)."""

    mb_rows: int
    mb_cols: int
    lost: np.ndarray
    mb_size: int = 16

    def __post_init__(self):
        if self.mb_rows < 1 or self.mb_cols < 1 or self.mb_size < 1:
            raise DomainError("macroblock grid dimensions must be >= 1")
        lost = np.asarray(self.lost, dtype=bool).reshape(-1)
        if lost.size != self.mb_rows * self.mb_cols:
            raise DimensionMismatchError(
                f"lost has {lost.size} entries for a {self.mb_rows}x{self.mb_cols} grid"
            )
        lost = lost.copy()
        lost.setflags(write=False)
        object.__setattr__(self, "lost", lost)

    @classmethod
    def for_frame(cls, shape, mb_size=16, lost_addresses=()):
        rows, cols = grid_shape(shape, mb_size)
        lost = np.zeros(rows * cols, dtype=bool)
        addresses = np.asarray(list(lost_addresses), dtype=np.intp)
        if addresses.size and (addresses.min() < 0 or addresses.max() >= lost.size):
            raise DomainError("macroblock address out of range")
        lost[addresses] = True
        return cls(rows, cols, lost, mb_size)

    @property
    def lost_addresses(self):
        return [int(a) for a in np.flatnonzero(self.lost)]

    @property
    def lost_count(self):
        return int(self.lost.sum())

    @property
    def grid(self):
        return self.lost.reshape(self.mb_rows, self.mb_cols)

    def pixel_mask(self, shape):
        """Boolean pixel mask, True on pixels of lost macroblocks."""
        if grid_shape(shape, self.mb_size) != (self.mb_rows, self.mb_cols):
            raise DimensionMismatchError(
                f"frame shape {tuple(shape)} does not fit a {self.mb_rows}x{self.mb_cols} "
                f"grid of {self.mb_size}-pixel macroblocks"
            )
        s = self.mb_size
        full = np.repeat(np.repeat(self.grid, s, axis=0), s, axis=1)
        return full[: shape[0], : shape[1]]

    def __eq__(self, other):
        if not isinstance(other, LossMask):
            return NotImplemented
        return (
            (self.mb_rows, self.mb_cols, self.mb_size)
            == (other.mb_rows, other.mb_cols, other.mb_size)
            and bool(np.array_equal(self.lost, other.lost))
        )

    __hash__ = None


def grid_shape(shape, mb_size=16):
    height, width = shape
    return math.ceil(height / mb_size), math.ceil(width / mb_size)


@dataclass
class ConcealmentReport:
    frame_index: int
    method: str
    psnr_db: float
    lost_mb_count: int
    solver_outer_iters: int = 0
    final_q: float = None


def simulate_loss(mb_rows, mb_cols, loss_rate, seed, mb_size=16):
    """Independent per-macroblock Bernoulli losses from a seeded generator."""
    if not 0 <= loss_rate <= 1:
        raise DomainError(f"loss_rate must lie in [0, 1], got {loss_rate}")
    rng = np.random.default_rng(seed)
    lost = rng.random(mb_rows * mb_cols) < loss_rate
    return LossMask(mb_rows, mb_cols, lost, mb_size)


def _block_means(field, mask):
    """Mean valid vector per macroblock and whether the block had any."""
    s = mask.mb_size
    sums = np.zeros((mask.mb_rows, mask.mb_cols, 2))
    counts = np.zeros((mask.mb_rows, mask.mb_cols))
    vecs = np.where(field.valid[..., None], field.vectors, 0.0)
    for r in range(mask.mb_rows):
        for c in range(mask.mb_cols):
            sl = (slice(r * s, (r + 1) * s), slice(c * s, (c + 1) * s))
            counts[r, c] = field.valid[sl].sum()
            sums[r, c] = vecs[sl].reshape(-1, 2).sum(axis=0)
    has = counts > 0
    means = np.zeros_like(sums)
    means[has] = sums[has] / counts[has][:, None]
    return means, has


def avgn_conceal(field, mask):
    """Fill lost macroblocks with the mean of neighbouring block MVs.

    Available neighbours are the in-bounds, received 8-neighbours holding
    at least one valid vector.  Without any, the zero vector is used.
    """
    mask.pixel_mask(field.shape)  # validates geometry
    means, has = _block_means(field, mask)
    available = has & ~mask.grid
    vectors = np.array(field.vectors)
    valid = np.array(field.valid)
    s = mask.mb_size
    for r, c in zip(*np.nonzero(mask.grid)):
        neigh = [
            means[rr, cc]
            for rr in range(r - 1, r + 2)
            for cc in range(c - 1, c + 2)
            if (rr, cc) != (r, c)
            and 0 <= rr < mask.mb_rows
            and 0 <= cc < mask.mb_cols
            and available[rr, cc]
        ]
        fill = np.mean(neigh, axis=0) if neigh else np.zeros(2)
        sl = (slice(r * s, (r + 1) * s), slice(c * s, (c + 1) * s))
        vectors[sl] = fill
        valid[sl] = True
    return MotionField(vectors, valid)


def copy_conceal(mask, shape):
    """Zero motion on lost macroblocks (co-located temporal copy)."""
    lost = mask.pixel_mask(shape)
    return MotionField(np.zeros(tuple(shape) + (2,)), lost)


def _neighbour_mean(values, known):
    """3x3 mean of ``values`` over ``known`` cells, and where it exists."""
    w = known.astype(np.float64)
    num = uniform_filter(values * w, size=3, mode="constant")
    den = uniform_filter(w, size=3, mode="constant")
    has = den > 1e-12
    out = np.zeros_like(values)
    out[has] = num[has] / den[has]
    return out, has


def diffuse_reference(values, known, fallback):
    """Reference grid by 3x3 averaging over known cells, grown outward.

    Known cells get the mean of their known 3x3 neighbourhood.  Unknown
    cells are filled ring by ring with the mean of already-filled
    neighbours.  With nothing known the grid is ``fallback`` everywhere.
    """
    values = np.asarray(values, dtype=np.float64)
    known = np.asarray(known, dtype=bool)
    if not known.any():
        return np.full(values.shape, float(fallback))
    ref, _ = _neighbour_mean(values, known)
    ref = np.where(known, ref, 0.0)
    filled = known.copy()
    while not filled.all():
        mean, has = _neighbour_mean(ref, filled)
        grow = has & ~filled
        ref[grow] = mean[grow]
        filled |= grow
    return ref


@dataclass
class RefinementResult:
    field: MotionField
    traces: list = field(default_factory=list)

    @property
    def outer_iterations(self):
        return sum(t.outer_iterations for t in self.traces)

    @property
    def final_q(self):
        # last pass of each component
        return float(sum(t.final_q for t in self.traces[-2:]))

    @property
    def converged(self):
        return all(t.converged for t in self.traces)


def refine_field(field, breg_cfg=BregmanConfig(), d_max=15.0, exclude=None):
    """Regularize and in-fill an estimated field over the whole grid.

    Each component is shifted by ``d_max + 1`` into the positive domain.
    Valid, non-excluded pixels are observations with unit weight; the
    reference is the diffused neighbourhood mean of the observations.
    After a first solve the reference is rebuilt from the solution and the
    problem is solved again.
    """
    shift = d_max + 1.0
    observed = np.array(field.valid)
    if exclude is not None:
        observed &= ~check_mask(exclude, field.shape, "exclude")
    weight = observed.astype(np.float64)
    floor = breg_cfg.epsilon_floor
    traces = []
    components = []
    for comp in (field.dh, field.dv):
        y = np.where(observed, comp + shift, shift)
        reference = np.maximum(diffuse_reference(y, observed, shift), floor)
        problem = RegularizedProblem(y, weight, reference, epsilon_floor=floor)
        x, trace = newton_solve(problem, breg_cfg, x0=reference)
        traces.append(trace)
        components.append((y, x))
    out = []
    for y, x in components:
        refreshed, _ = _neighbour_mean(x, np.ones(x.shape, dtype=bool))
        problem = RegularizedProblem(
            y, weight, np.maximum(refreshed, floor), epsilon_floor=floor
        )
        x2, trace = newton_solve(problem, breg_cfg, x0=x)
        traces.append(trace)
        out.append(np.clip(x2 - shift, -d_max, d_max))
    return RefinementResult(MotionField.from_components(out[0], out[1]), traces)


def bregman_conceal(curr, prev, mask, est_cfg=EstimationConfig(), breg_cfg=BregmanConfig()):
    """Estimate motion on legitimate pixels and refine it over the frame.

    Returns ``(field, result)`` where ``result`` is a
    :class:`RefinementResult` holding the solver traces.
    """
    curr = check_frame(curr, "curr")
    prev = check_frame(prev, "prev")
    check_same_shape(curr, prev, names=("curr", "prev"))
    lost = mask.pixel_mask(curr.shape)
    estimated = estimate_field(curr, prev, ~lost, est_cfg)
    result = refine_field(estimated, breg_cfg, est_cfg.d_max)
    return result.field, result


def conceal_frame(curr_damaged, prev, field, mask):
    """Replace lost-macroblock pixels with motion-compensated ``prev``."""
    curr = check_frame(curr_damaged, "curr_damaged")
    prev = check_frame(prev, "prev")
    check_same_shape(curr, prev, names=("curr_damaged", "prev"))
    lost = mask.pixel_mask(curr.shape)
    compensated = warp_frame(prev, field)
    return np.where(lost, compensated, curr)


def zero_fill(curr_damaged, mask):
    curr = check_frame(curr_damaged, "curr_damaged")
    return np.where(mask.pixel_mask(curr.shape), 0.0, curr)


def damage_frame(frame, mask):
    """Simulate reception: lost macroblocks arrive as zeros."""
    return zero_fill(frame, mask)


def _holdout_score(curr, prev, field, held):
    vs, hs = np.nonzero(held)
    if hs.size == 0:
        return 0.0
    pred = bilinear_sample(prev, hs - field.dh[vs, hs], vs - field.dv[vs, hs])
    return float(np.mean((curr[vs, hs] - pred) ** 2))


def select_alpha(
    curr, prev, mask, est_cfg=EstimationConfig(), breg_cfg=BregmanConfig(),
    alpha_grid=DEFAULT_ALPHA_GRID, seed=0,
):
    """Pick the regularization weight by seeded hold-out validation.

    A random tenth of the validly estimated pixels is removed from the
    data term; each candidate is scored by the mean squared displaced
    frame difference of the refined field on those pixels.  Ties go to
    the larger weight.

    Returns ``(alpha_best, scores)`` with ``scores`` mapping each
    candidate to its hold-out score.
    """
    alpha_grid = [float(a) for a in alpha_grid]
    if not alpha_grid or min(alpha_grid) <= 0:
        raise DomainError("alpha_grid must be non-empty with positive entries")
    curr = check_frame(curr, "curr")
    prev = check_frame(prev, "prev")
    check_same_shape(curr, prev, names=("curr", "prev"))
    lost = mask.pixel_mask(curr.shape)
    estimated = estimate_field(curr, prev, ~lost, est_cfg)
    vs, hs = np.nonzero(estimated.valid)
    rng = np.random.default_rng(seed)
    n_hold = int(round(HOLDOUT_FRACTION * hs.size))
    pick = rng.choice(hs.size, size=n_hold, replace=False) if n_hold else np.empty(0, int)
    held = np.zeros(curr.shape, dtype=bool)
    held[vs[pick], hs[pick]] = True
    scores = {}
    for alpha in alpha_grid:
        result = refine_field(estimated, replace(breg_cfg, alpha=alpha), est_cfg.d_max, held)
        scores[alpha] = _holdout_score(curr, prev, result.field, held)
    best = min(scores.values())
    alpha_best = max(a for a, s in scores.items() if s == best)
    return alpha_best, scores
