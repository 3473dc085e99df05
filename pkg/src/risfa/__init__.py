"""RIS-assisted multiuser beamforming with movable (fluid) antenna positions."""

from .channel import ChannelSet, NlosDraws, assemble_channels, cascade, draw_nlos, fa_steering, ris_steering
from .convex_kernel import SolverError, solve_qp, solve_sdp
from .driver import BcdResult, ExperimentSpec, bcd_optimize, cli, run_experiment, trial_draws
from .fapos import build_quadratic_bound, build_trig_objective, mm_optimize_positions, surrogate_cos, surrogate_sin
from .hbf import hbf_optimize, initial_state
from .metrics import BeamformerState, RisState, beampattern, rate_of, sinr, sum_rate
from .ris_opt import ris_optimize
from .scenario import Apv, Scenario, ScenarioError, default_scenario, load_scenario, uniform_apv
from .tfa import dual_gl_spacing, gl_spacing, tfa_pipeline, tfa_positions_abf, tfa_steering
from .tracing import SolutionTrace

__version__ = "0.1.0"

__all__ = [
    "Apv",
    "assemble_channels",
    "bcd_optimize",
    "BcdResult",
    "BeamformerState",
    "beampattern",
    "build_quadratic_bound",
    "build_trig_objective",
    "cascade",
    "ChannelSet",
    "cli",
    "default_scenario",
    "draw_nlos",
    "dual_gl_spacing",
    "ExperimentSpec",
    "fa_steering",
    "gl_spacing",
    "hbf_optimize",
    "initial_state",
    "load_scenario",
    "mm_optimize_positions",
    "NlosDraws",
    "rate_of",
    "ris_optimize",
    "ris_steering",
    "RisState",
    "run_experiment",
    "Scenario",
    "ScenarioError",
    "sinr",
    "SolutionTrace",
    "solve_qp",
    "solve_sdp",
    "SolverError",
    "sum_rate",
    "surrogate_cos",
    "surrogate_sin",
    "tfa_pipeline",
    "tfa_positions_abf",
    "tfa_steering",
    "trial_draws",
    "uniform_apv",
]
