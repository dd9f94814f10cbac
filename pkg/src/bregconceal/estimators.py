"""scikit-learn style front ends.

These wrap the functional API so that parameters can be inspected, cloned
and grid-searched with the usual ``get_params``/``set_params`` machinery.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_frame
from .bregman import BregmanConfig, RegularizedProblem, identity_kernel, newton_solve
from .concealment import (
    DEFAULT_ALPHA_GRID,
    METHODS,
    avgn_conceal,
    conceal_frame,
    copy_conceal,
    refine_field,
    select_alpha,
    zero_fill,
)
from .exceptions import DomainError
from .motion import EstimationConfig, estimate_field


class BregmanRegularizer(TransformerMixin, BaseEstimator):
    """Regularized inversion of a grid of positive observations.

    ``fit(X)`` solves for the minimizer of the Bregman-penalized least
    squares functional with ``X`` as data; ``transform`` returns it.
    """

    def __init__(self, alpha=1.0, q=1.0, gamma=0.8, kernel=None, outer_max=100,
                 inner_max=200, outer_tol=1e-6, inner_tol=1e-8, epsilon_floor=1e-6):
        self.alpha = alpha
        self.q = q
        self.gamma = gamma
        self.kernel = kernel
        self.outer_max = outer_max
        self.inner_max = inner_max
        self.outer_tol = outer_tol
        self.inner_tol = inner_tol
        self.epsilon_floor = epsilon_floor

    def config(self):
        return BregmanConfig(
            q=self.q, alpha=self.alpha, gamma=self.gamma, outer_max=self.outer_max,
            inner_max=self.inner_max, outer_tol=self.outer_tol, inner_tol=self.inner_tol,
            epsilon_floor=self.epsilon_floor,
        )

    def _problem(self, X, sample_weight, reference):
        X = check_frame(X, "X")
        weight = np.ones_like(X) if sample_weight is None else sample_weight
        if reference is None:
            reference = np.maximum(X, self.epsilon_floor)
        kernel = identity_kernel() if self.kernel is None else self.kernel
        return RegularizedProblem(X, weight, reference, kernel, self.epsilon_floor)

    def fit(self, X, y=None, sample_weight=None, reference=None):
        problem = self._problem(X, sample_weight, reference)
        self.solution_, self.trace_ = newton_solve(problem, self.config())
        self.n_iter_ = self.trace_.outer_iterations
        self.converged_ = self.trace_.converged
        return self

    def transform(self, X, sample_weight=None, reference=None):
        check_is_fitted(self, "solution_")
        problem = self._problem(X, sample_weight, reference)
        solution, _ = newton_solve(problem, self.config())
        return solution

    def fit_transform(self, X, y=None, sample_weight=None, reference=None):
        return self.fit(X, y, sample_weight, reference).solution_


class MotionConcealer(BaseEstimator):
    """Temporal concealment of lost macroblocks in one frame.

    ``fit(curr, prev, mask)`` computes the concealment motion field
    (``field_``); ``predict`` motion-compensates the lost blocks.

    Parameters
    ----------
    method : {"bregman", "avgn", "copy", "zero-fill"}
    alpha_mode : {"fixed", "search"}
        With ``"search"`` the regularization weight is chosen from
        ``alpha_grid`` by hold-out validation before concealing.
    """

    def __init__(self, method="bregman", alpha=1.0, q=1.0, gamma=0.8,
                 alpha_mode="fixed", alpha_grid=None, window_half=2,
                 max_refinements=10, min_gradient_energy=1e-4, d_max=15.0,
                 outer_max=100, inner_max=200, outer_tol=1e-6, inner_tol=1e-8,
                 seed=0):
        self.method = method
        self.alpha = alpha
        self.q = q
        self.gamma = gamma
        self.alpha_mode = alpha_mode
        self.alpha_grid = alpha_grid
        self.window_half = window_half
        self.max_refinements = max_refinements
        self.min_gradient_energy = min_gradient_energy
        self.d_max = d_max
        self.outer_max = outer_max
        self.inner_max = inner_max
        self.outer_tol = outer_tol
        self.inner_tol = inner_tol
        self.seed = seed

    def estimation_config(self):
        return EstimationConfig(
            window_half=self.window_half, max_refinements=self.max_refinements,
            min_gradient_energy=self.min_gradient_energy, d_max=self.d_max,
        )

    def bregman_config(self, alpha=None):
        return BregmanConfig(
            q=self.q, alpha=self.alpha if alpha is None else alpha, gamma=self.gamma,
            outer_max=self.outer_max, inner_max=self.inner_max,
            outer_tol=self.outer_tol, inner_tol=self.inner_tol,
        )

    def fit(self, curr, prev, mask):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.alpha_mode not in ("fixed", "search"):
            raise DomainError(f"unknown alpha_mode {self.alpha_mode!r}")
        curr = check_frame(curr, "curr")
        prev = check_frame(prev, "prev")
        lost = mask.pixel_mask(curr.shape)
        est_cfg = self.estimation_config()
        self.alpha_ = self.alpha
        self.refinement_ = None
        self.alpha_scores_ = None
        if self.method == "copy" or self.method == "zero-fill":
            self.field_ = copy_conceal(mask, curr.shape)
            return self
        estimated = estimate_field(curr, prev, ~lost, est_cfg)
        if self.method == "avgn":
            self.field_ = avgn_conceal(estimated, mask)
            return self
        if self.alpha_mode == "search":
            grid = DEFAULT_ALPHA_GRID if self.alpha_grid is None else self.alpha_grid
            self.alpha_, self.alpha_scores_ = select_alpha(
                curr, prev, mask, est_cfg, self.bregman_config(), grid, self.seed
            )
        self.refinement_ = refine_field(estimated, self.bregman_config(self.alpha_), self.d_max)
        self.field_ = self.refinement_.field
        return self

    def predict(self, curr, prev, mask):
        check_is_fitted(self, "field_")
        if self.method == "zero-fill":
            return zero_fill(curr, mask)
        return conceal_frame(curr, prev, self.field_, mask)

    def fit_predict(self, curr, prev, mask):
        return self.fit(curr, prev, mask).predict(curr, prev, mask)

    @property
    def n_iter_(self):
        check_is_fitted(self, "field_")
        return 0 if self.refinement_ is None else self.refinement_.outer_iterations

    @property
    def final_q_(self):
        check_is_fitted(self, "field_")
        return None if self.refinement_ is None else self.refinement_.final_q
