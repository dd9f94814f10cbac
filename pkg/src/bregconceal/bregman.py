"""Tikhonov functional with a q-discrepancy Bregman penalty and its solver.

The functional over a grid ``x`` is::

    Q(x) = sum w * (y - b * x)**2 + alpha * D_q(x, x_ref)

where ``b * x`` is the correlation of ``x`` with a small stencil ``b`` under
clamp-to-edge indexing and ``D_q`` is the q-discrepancy Bregman divergence::

    D_q(x, r) = 1/(1+q) * sum( x * (x**q - r**q) / q - r**q * (x - r) )

``D_1`` is half the squared error and ``D_q`` tends to the I-divergence as
``q -> 0``.  Stationary points are found with Newton-Raphson outer
iterations whose linear systems are solved by raster-order Gauss-Seidel
sweeps; the outer step is relaxed by ``gamma``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numba as nb
import numpy as np
import scipy.sparse as sp

from ._validation import check_positive, check_same_shape
from .exceptions import (
    DimensionMismatchError,
    DomainError,
    SingularDiagonalError,
    SingularSystemError,
)

DIAGONAL_FLOOR = 1e-12
DENSE_LIMIT = 32 * 32


@dataclass(frozen=True)
class BregmanConfig:
    q: float = 1.0
    alpha: float = 1.0
    gamma: float = 0.8
    outer_max: int = 100
    inner_max: int = 200
    outer_tol: float = 1e-6
    inner_tol: float = 1e-8
    epsilon_floor: float = 1e-6

    def __post_init__(self):
        if not self.q > 0:
            raise DomainError(f"q must be > 0, got {self.q}")
        if not self.alpha >= 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 < self.gamma <= 1:
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.outer_max < 1 or self.inner_max < 1:
            raise DomainError("outer_max and inner_max must be >= 1")
        if not (self.outer_tol > 0 and self.inner_tol > 0 and self.epsilon_floor > 0):
            raise DomainError("tolerances and epsilon_floor must be > 0")


def identity_kernel():
    return np.ones((1, 1))


@dataclass(frozen=True, eq=False)
class RegularizedProblem:
    """Data of one regularized inversion on a ``height x width`` grid.

    ``weight`` is zero on cells without an observation.  ``kernel`` is a
    ``(2N+1, 2N+1)`` stencil; ``kernel[N + k, N + l]`` multiplies
    ``x[i + k, j + l]`` in the forward model.
    """

    y: np.ndarray
    weight: np.ndarray
    reference: np.ndarray
    kernel: np.ndarray = field(default_factory=identity_kernel)
    epsilon_floor: float = 1e-6

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        weight = np.asarray(self.weight, dtype=np.float64)
        reference = np.asarray(self.reference, dtype=np.float64)
        kernel = np.atleast_2d(np.asarray(self.kernel, dtype=np.float64))
        if y.ndim != 2:
            raise DomainError(f"y must be 2-D, got shape {y.shape}")
        check_same_shape(y, weight, reference, names=("y", "weight", "reference"))
        if kernel.shape[0] != kernel.shape[1] or kernel.shape[0] % 2 != 1:
            raise DomainError(f"kernel must be square with odd side, got {kernel.shape}")
        if not np.all(np.isfinite(kernel)) or not np.all(np.isfinite(y)):
            raise DomainError("kernel and y must be finite")
        if not np.all(np.isfinite(weight)) or weight.min() < 0:
            raise DomainError("weight must be finite and non-negative")
        check_positive(reference, self.epsilon_floor, "reference")
        for name, arr in (("y", y), ("weight", weight), ("reference", reference), ("kernel", kernel)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return self.y.shape

    @property
    def half_width(self):
        return self.kernel.shape[0] // 2

    @cached_property
    def operator(self):
        """Sparse CSR matrix of the clamped correlation ``x -> b * x``."""
        height, width = self.shape
        n = self.half_width
        rows, cols, vals = [], [], []
        ii, jj = np.indices(self.shape)
        flat = (ii * width + jj).ravel()
        for k in range(-n, n + 1):
            ci = np.clip(ii + k, 0, height - 1)
            for l in range(-n, n + 1):
                b = self.kernel[n + k, n + l]
                if b == 0.0:
                    continue
                cj = np.clip(jj + l, 0, width - 1)
                rows.append(flat)
                cols.append((ci * width + cj).ravel())
                vals.append(np.full(flat.size, b))
        size = height * width
        if not rows:
            return sp.csr_matrix((size, size))
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(size, size),
        )
        return mat.tocsr()

    @cached_property
    def _gram(self):
        B = self.operator
        return (2.0 * (B.T @ sp.diags(self.weight.ravel()) @ B)).tocsr()

    def forward(self, x):
        """Return ``b * x`` on the grid."""
        return (self.operator @ np.asarray(x, dtype=np.float64).ravel()).reshape(self.shape)


@dataclass
class SolverState:
    x_hat: np.ndarray
    delta: np.ndarray
    t: int = 0
    c: int = 0


@dataclass
class SolverTrace:
    """Per-outer-iteration record of a Newton solve.

    ``q_values[t]`` is Q at the iterate produced by outer step ``t``.
    """

    q_initial: float
    q_values: list = field(default_factory=list)
    update_norms: list = field(default_factory=list)
    inner_sweeps: list = field(default_factory=list)
    converged: bool = False

    @property
    def outer_iterations(self):
        return len(self.q_values)

    @property
    def final_q(self):
        return self.q_values[-1] if self.q_values else self.q_initial


def _power_difference_over_q(x, r, q):
    # (x**q - r**q) / q, written to stay accurate for tiny q
    return r**q * np.expm1(q * np.log(x / r)) / q


def bregman_divergence(x_hat, x_bar, q, epsilon_floor=1e-6):
    """q-discrepancy Bregman divergence ``D_q(x_hat, x_bar)`` summed over cells.

    >>> float(bregman_divergence([[3.0]], [[1.0]], q=1.0))
    2.0
    """
    if not q > 0:
        raise DomainError(f"q must be > 0, got {q}")
    x_hat = np.asarray(x_hat, dtype=np.float64)
    x_bar = np.asarray(x_bar, dtype=np.float64)
    if x_hat.shape != x_bar.shape:
        raise DimensionMismatchError(f"shape mismatch: {x_hat.shape} vs {x_bar.shape}")
    check_positive(x_hat, epsilon_floor, "x_hat")
    check_positive(x_bar, epsilon_floor, "x_bar")
    terms = x_hat * _power_difference_over_q(x_hat, x_bar, q) - x_bar**q * (x_hat - x_bar)
    return float(terms.sum() / (1.0 + q))


def _check_iterate(x_hat, problem, cfg):
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x_hat.shape != problem.shape:
        raise DimensionMismatchError(
            f"iterate shape {x_hat.shape} does not match problem shape {problem.shape}"
        )
    return check_positive(x_hat, cfg.epsilon_floor, "x_hat")


def q_functional(x_hat, problem, cfg):
    """Value of the regularized functional at ``x_hat``."""
    x_hat = _check_iterate(x_hat, problem, cfg)
    resid = problem.y - problem.forward(x_hat)
    data = float(np.sum(problem.weight * resid**2))
    if cfg.alpha == 0:
        return data
    return data + cfg.alpha * bregman_divergence(
        x_hat, problem.reference, cfg.q, cfg.epsilon_floor
    )


def q_gradient(x_hat, problem, cfg):
    """Analytic gradient of :func:`q_functional`, shaped like the grid."""
    x_hat = _check_iterate(x_hat, problem, cfg)
    resid = (problem.weight * (problem.y - problem.forward(x_hat))).ravel()
    data = -2.0 * (problem.operator.T @ resid).reshape(problem.shape)
    return data + cfg.alpha * _power_difference_over_q(x_hat, problem.reference, cfg.q)


def q_jacobian(x_hat, problem, cfg):
    """Sparse Jacobian of :func:`q_gradient` (the Hessian of Q)."""
    x_hat = _check_iterate(x_hat, problem, cfg)
    curvature = cfg.alpha * x_hat.ravel() ** (cfg.q - 1.0)
    return (problem._gram + sp.diags(curvature)).tocsr()


@nb.njit(cache=True)
def _sweep(indptr, indices, data, rhs, delta):
    n = rhs.shape[0]
    for i in range(n):
        diag = 0.0
        acc = rhs[i]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j == i:
                diag += data[p]
            else:
                acc += data[p] * delta[j]
        delta[i] = -acc / diag


def gauss_seidel_sweep(state, problem, cfg, F, jacobian=None):
    """One raster-order Gauss-Seidel sweep on ``J @ delta = -F``.

    Cells already visited in this sweep contribute their new corrections,
    the rest their previous ones.  Returns the new state (``c`` advanced)
    and the sup-norm of ``F + J @ delta``.
    """
    J = q_jacobian(state.x_hat, problem, cfg) if jacobian is None else jacobian
    diag = J.diagonal()
    bad = np.flatnonzero(np.abs(diag) < DIAGONAL_FLOOR)
    if bad.size:
        r, s = divmod(int(bad[0]), problem.shape[1])
        raise SingularDiagonalError(
            f"Jacobian diagonal vanishes at cell ({r}, {s}); "
            "alpha must be > 0 where the data weight is zero"
        )
    rhs = np.ascontiguousarray(np.asarray(F, dtype=np.float64).ravel())
    delta = np.array(state.delta, dtype=np.float64).ravel()
    _sweep(J.indptr, J.indices, J.data, rhs, delta)
    residual = float(np.max(np.abs(rhs + J @ delta))) if rhs.size else 0.0
    new_state = SolverState(
        x_hat=state.x_hat, delta=delta.reshape(problem.shape), t=state.t, c=state.c + 1
    )
    return new_state, residual


def newton_solve(problem, cfg, x0=None):
    """Minimize Q by relaxed Newton-Raphson with Gauss-Seidel inner solves.

    Parameters
    ----------
    problem : RegularizedProblem
    cfg : BregmanConfig
    x0 : array_like, optional
        Starting grid; defaults to ``problem.reference``.

    Returns
    -------
    solution : ndarray
        Final iterate, or the lowest-Q iterate seen when ``outer_max`` is
        reached without meeting ``outer_tol`` (``trace.converged`` is False).
    trace : SolverTrace
    """
    x = problem.reference.copy() if x0 is None else _check_iterate(x0, problem, cfg).copy()
    trace = SolverTrace(q_initial=q_functional(x, problem, cfg))
    best_x, best_q = x, trace.q_initial
    state = SolverState(x_hat=x, delta=np.zeros(problem.shape))
    for t in range(cfg.outer_max):
        F = q_gradient(x, problem, cfg)
        J = q_jacobian(x, problem, cfg)
        state = SolverState(x_hat=x, delta=np.zeros(problem.shape), t=t, c=0)
        for _ in range(cfg.inner_max):
            state, residual = gauss_seidel_sweep(state, problem, cfg, F, J)
            if residual < cfg.inner_tol:
                break
        step = cfg.gamma * state.delta
        x = np.maximum(x + step, cfg.epsilon_floor)
        update = float(np.max(np.abs(step))) / max(float(np.max(np.abs(state.x_hat))), 1.0)
        q = q_functional(x, problem, cfg)
        trace.q_values.append(q)
        trace.update_norms.append(update)
        trace.inner_sweeps.append(state.c)
        if q <= best_q:
            best_x, best_q = x, q
        if update < cfg.outer_tol:
            trace.converged = True
            return x, trace
    return best_x, trace


def solve_q1_closed_form(problem, cfg):
    """Direct dense solve of the linear stationarity system for ``q = 1``.

    Solves ``(2 B^T W B + alpha I) x = 2 B^T W y + alpha x_ref``.  Meant as
    an oracle on small grids; no positivity projection is applied.
    """
    if cfg.q != 1:
        raise DomainError(f"closed form requires q == 1, got {cfg.q}")
    size = problem.y.size
    if size > DENSE_LIMIT:
        raise DomainError(f"grid of {size} cells exceeds the dense limit {DENSE_LIMIT}")
    B = problem.operator.toarray()
    w = problem.weight.ravel()
    A = 2.0 * B.T @ (w[:, None] * B) + cfg.alpha * np.eye(size)
    rhs = 2.0 * B.T @ (w * problem.y.ravel()) + cfg.alpha * problem.reference.ravel()
    if np.linalg.matrix_rank(A) < size:
        raise SingularSystemError("normal matrix is rank deficient; use alpha > 0")
    return np.linalg.solve(A, rhs).reshape(problem.shape)
