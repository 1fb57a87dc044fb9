"""Design-adapted Haar thresholding on lattice random fields.

Two halves: a conclique Gibbs sampler for Gaussian conditional
autoregressions on rectangular lattices, and a regression estimator that
orthonormalizes a tensor Haar dictionary against the empirical design
measure, thresholds the coefficients and truncates the fit.
"""

from .basis import (BasisFunction, EmpiricalBasis, PiecewiseConstantFn,
                    build_basis, design_matrix, gram_schmidt_generic,
                    orthonormalize_cube, standard_haar)
from .dyadic import (DyadicCube, LabeledSample, SampleIndex, build_index,
                     empirical_measure, locate)
from .estimator import (ThresholdedModel, fit_coefficients, fit_model,
                        load_model, penalized_objective, save_model,
                        threshold, truncate)
from .harness import (DEFAULT_GRID, ExperimentConfig, RateSchedule,
                      ResultRow, export, independent_reference, l2_error,
                      rate_probe, run_experiment, theoretical_schedule)
from .kernels import backend
from .mrf import (CarSpec, ConcliqueCover, FieldState, InadmissibleEta,
                  LatticeGraph, NonBipartite, NotPositiveDefinite,
                  admissible_eta_range,
                  analytic_covariance, conclique_cover, conditional_update,
                  experiment_car_spec, gibbs_run, load_field_snapshot,
                  load_sample_snapshot, m1, m2, make_regression_sample,
                  sample_stationary_fields, save_field_snapshot,
                  save_sample_snapshot, stationary_sd, transform_a,
                  transform_b)

__version__ = "0.1.0"

__all__ = [
    "BasisFunction", "CarSpec", "ConcliqueCover", "DEFAULT_GRID",
    "DyadicCube", "EmpiricalBasis", "ExperimentConfig", "FieldState",
    "InadmissibleEta", "LabeledSample", "LatticeGraph", "NonBipartite",
    "NotPositiveDefinite", "PiecewiseConstantFn", "RateSchedule",
    "ResultRow", "SampleIndex", "ThresholdedModel",
    "admissible_eta_range", "analytic_covariance", "backend",
    "build_basis", "build_index", "conclique_cover", "conditional_update",
    "design_matrix", "empirical_measure", "experiment_car_spec", "export",
    "fit_coefficients", "fit_model", "gibbs_run", "gram_schmidt_generic",
    "independent_reference", "l2_error", "load_field_snapshot",
    "load_model", "load_sample_snapshot", "locate", "m1", "m2",
    "make_regression_sample", "orthonormalize_cube", "penalized_objective",
    "rate_probe", "run_experiment", "sample_stationary_fields",
    "save_field_snapshot", "save_model", "save_sample_snapshot",
    "standard_haar", "stationary_sd", "theoretical_schedule", "threshold",
    "transform_a", "transform_b", "truncate",
]
