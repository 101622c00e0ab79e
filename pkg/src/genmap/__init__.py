"""genmap: generalized modes and MAP estimation for Bayesian inverse
problems with uniform random-series priors.

The package revolves around a weighted box in sequence space: the prior
is a random series with independent uniform coefficients, its
generalized modes fill the box exactly, and generalized MAP estimates
are the box-constrained minimizers of the data misfit.  Modules:

  sequence_core   the box, its shrunken versions, metric projections
  uniform_prior   sampling, exact and Monte Carlo ball probabilities,
                  mode classification and diagnostics
  mode_lab        1-d piecewise densities: strong vs generalized modes
  posterior       likelihoods, the MAP objective, importance sampling
  map_solver      closed-form denoising and projected-gradient solves
  consistency     small-noise and large-sample experiments
  cli             the ``genmap`` command line
"""

__version__ = "0.1.0"

from .errors import DomainError, EstimationError, EvaluationError, GenmapError
from .sequence_core import (
    PowerLawTail,
    SeqPoint,
    WeightSequence,
    box_project,
    in_E_gamma,
    in_E_gamma_delta,
    project_delta,
    sup_norm,
)
from .uniform_prior import (
    BallEstimate,
    RngSpec,
    ball_prob_exact,
    ball_prob_mc,
    classify_generalized_mode,
    component_ratio,
    max_ball_prob,
    sample_prior,
    strong_mode_diagnostic,
)
from .mode_lab import (
    PiecewiseDensity1D,
    ball_prob_1d,
    builtin_density,
    cluster_density,
    gaussian_density,
    generalized_mode_diagnostic,
    max_ball_prob_1d,
    mode_curve_rows,
    property_ratio_check,
    standard_density,
    strong_mode_ratio_curve,
)
from .posterior import (
    ForwardModel,
    OmRatioPoint,
    PosteriorSpec,
    bounded_smooth_model,
    componentwise_square_model,
    grad_phi,
    likelihood_phi,
    linear_model,
    om_functional,
    om_ratio_check,
    posterior_ball_prob_mc,
)
from .map_solver import (
    SolveReport,
    fixed_point_residual,
    solve_map_denoising,
    solve_map_pg,
)
from .consistency import (
    ConsistencyRow,
    ConsistencyTable,
    ConvergenceVerdict,
    ExperimentPlan,
    SpecTemplate,
    convergence_in_probability_test,
    run_large_sample,
    run_small_noise,
)
from .schedules import geometric as geometric_schedule
