"""Temporal-mode structure of broadband parametric amplifiers at arbitrary gain."""

from .analysis import SweepRecord, fwhm, g2_from_M, mode_number, sweep_K
from .grid import FrequencyGrid, KernelMatrix, make_grid
from .modes import ModeStructure, extract_mode_structure, verify_appendix
from .propagator import (FACTORIZED, FIBER, PropagationConfig, PumpModel, TransferState,
                         analytic_low_gain_jsf, bogoliubov_residual, propagate)
from .su11 import ComplexGain, ContinuousGainParams, StageSpec, cascade, compose_two_stage, continuous_gain

__version__ = "0.1.0"

__all__ = [
    "ComplexGain", "ContinuousGainParams", "FACTORIZED", "FIBER", "FrequencyGrid", "KernelMatrix",
    "ModeStructure", "PropagationConfig", "PumpModel", "StageSpec", "SweepRecord", "TransferState",
    "analytic_low_gain_jsf", "bogoliubov_residual", "cascade", "compose_two_stage", "continuous_gain",
    "extract_mode_structure", "fwhm", "g2_from_M", "make_grid", "mode_number", "propagate", "sweep_K",
    "verify_appendix",
]
