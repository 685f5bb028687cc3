"""Time-varying graphical models under a Kronecker-sum spatiotemporal covariance."""
from .covmodel import (DataMatrix, KroneckerSumModel, SpatialTrajectory, TemporalCovariance,
                       assemble_sigma, validate_model)
from .glasso import GlassoProblem, GlassoSolution, glasso_solve, lambda_rule_a, lambda_rule_b
from .graphgen import (PrecisionGraph, TrajectorySpec, gen_ar1, gen_er_trajectory,
                       gen_grid_trajectory, gen_ma, gen_star_block, gen_trajectory)
from .kernelsmooth import Kernel, bandwidth_rule, make_weights, smoothed_covariance
from .metrics import mcc, rel_frobenius, rel_spectral, support_mcc
from .sampler import InnovationLaw, sample_data
from .spatial import BEstimate, estimate_b, estimate_b_path
from .temporal import AEstimate, estimate_a, psd_project_maxnorm, tune_trace_a

__version__ = "0.1.0"
