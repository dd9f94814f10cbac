"""Temporal error concealment with Bregman-regularized motion refinement."""

from .bregman import (
    BregmanConfig,
    RegularizedProblem,
    SolverState,
    SolverTrace,
    bregman_divergence,
    gauss_seidel_sweep,
    newton_solve,
    q_functional,
    q_gradient,
    q_jacobian,
    solve_q1_closed_form,
)
from .concealment import (
    ConcealmentReport,
    LossMask,
    avgn_conceal,
    bregman_conceal,
    conceal_frame,
    copy_conceal,
    refine_field,
    select_alpha,
    simulate_loss,
)
from .estimators import BregmanRegularizer, MotionConcealer
from .imaging import MotionField, bilinear_sample, dfd, spatial_gradient, warp_frame
from .metrics import psnr
from .motion import (
    EstimationConfig,
    ObservationSystem,
    build_observation,
    estimate_field,
    ols_update,
    refine_dv,
)

__version__ = "0.1.0"
