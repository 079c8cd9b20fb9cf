"""Exact and neural (NPLIC) solvers for the PLIC plane-constant problem."""

from nplic.estimators import ExactPLIC
from nplic.exact import solve_c_analytic_rect, solve_c_exact, solve_c_general
from nplic.geometry import Cell, MeshType, canonical_cell, volume_fraction
from nplic.model import MlpModel, NPLICRegressor, load_model, save_model

__all__ = [
    "Cell",
    "ExactPLIC",
    "MeshType",
    "MlpModel",
    "NPLICRegressor",
    "canonical_cell",
    "load_model",
    "save_model",
    "solve_c_analytic_rect",
    "solve_c_exact",
    "solve_c_general",
    "volume_fraction",
]

__version__ = "0.1.0"
