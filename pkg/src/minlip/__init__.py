"""Identification of monotone Wiener systems by Lipschitz-constant minimization.

A monotone Wiener system is a linear FIR block followed by a monotone static
nonlinearity. The MINLIP estimator recovers the FIR taps by solving a convex
quadratic program that makes the implied nonlinearity as flat as possible
while still reproducing the observed output ordering.
"""

from .analysis import (
    LipschitzProfile,
    PeReport,
    consistency_gap,
    empirical_lipschitz,
    local_pe_check,
    system_correlation,
    system_l2_norm,
)
from .baselines import BaselineEstimate, bai2006, ls_fir, ls_oracle
from .estimator import (
    ConstraintSystem,
    InfeasibleDataError,
    TieStructureError,
    WienerEstimate,
    build_consecutive_constraints,
    build_tie_constraints,
    estimate_from_json,
    estimate_to_json,
    minlip_identify,
    minlip_identify_noisy,
    reconstruct_f,
)
from .harness import ExperimentConfig, ResultRow, aggregate, run_experiment
from .qp import QpProblem, QpSettings, QpSolution, solve_qp
from .signals import (
    FirSystem,
    Nonlinearity,
    PoleZeroSystem,
    RegressorDataset,
    SortedDataset,
    TimeSeries,
    build_regressors,
    eval_nonlinearity,
    filter_signal,
    gaussian_input,
    impulse_response,
    normalize_gain,
    random_pole_zero,
    simulate_wiener,
    sort_by_output,
)

__version__ = "0.1.0"
