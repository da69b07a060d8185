"""Estimation-entropy bounds and quantized state estimation for open systems."""

from .bounds import BoundInputs, BoundResult, SearchGrid, g_c, g_c_linear, g_o, optimize, rho_form
from .dynamics import System, Trajectory, get_system, integrate, register_system
from .estimator import EstimatorParams, bit_rate, decode, encode, encode_exp
from .quantization import Box, Grid, grid_count, make_grid, quantize
from .signals import Signal, TimeSequence, VariationBudget, check_variation

__all__ = [
    "BoundInputs", "BoundResult", "SearchGrid", "g_c", "g_c_linear", "g_o", "optimize", "rho_form",
    "System", "Trajectory", "get_system", "integrate", "register_system",
    "EstimatorParams", "bit_rate", "decode", "encode", "encode_exp",
    "Box", "Grid", "grid_count", "make_grid", "quantize",
    "Signal", "TimeSequence", "VariationBudget", "check_variation",
]
