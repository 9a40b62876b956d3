"""Jackknife pseudo empirical likelihood intervals for U-statistics under survey designs."""

from .designs import (
    FinitePopulation,
    SurveySample,
    calibration_weights,
    draw_sample,
    generate_population,
    inclusion_probabilities,
    make_rng,
    pps_draw,
    rao_sampford_draw,
    srswor_draw,
)
from .elsolve import ELSolution, el_weights, solve_lambda_scalar, solve_lambda_vector
from .estimator import JackknifePseudoValues, JELInterval
from .inference import (
    ConfidenceInterval,
    DesignSummary,
    confidence_interval,
    design_effect,
    greg_estimate,
    hajek_estimate,
    jel_ratio,
    normal_ci,
    profile_ci,
    variance_estimate,
)
from .simulation import SimulationConfig, SimulationReport, emit_report, run_simulation
from .ustat import Kernel, PseudoValueSet, get_kernel, jackknife_pseudo_values, leave_one_out, u_statistic

__version__ = "0.1.0"
