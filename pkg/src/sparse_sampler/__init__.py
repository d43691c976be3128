"""Sampling strategies, weighted least squares and sparse recovery for
polynomial approximation on general domains."""
from . import basis, domains, experiments, indexsets, lsq, measures, ortho, rng, srlasso
from .basis import DictionarySpec, assemble_eval_matrix, evaluate
from .domains import DiscreteGrid, mc_grid
from .experiments import ExperimentConfig, run_experiment
from .indexsets import MultiIndexSet, hyperbolic_cross, tensor_product, total_degree
from .lsq import solve_ls
from .measures import constants_report, cs_optimal_plan, draw, ls_optimal_plan, mc_plan
from .ortho import OrthoBasis, orthonormalize
from .rng import StreamId
from .srlasso import SrLassoProblem, sr_lasso

__version__ = "0.1.0"
