"""Entrywise l1 / lp low-rank approximation by oblivious sketching."""

from .emd import EmdGrid, emd_embed, emd_exact, eemd_norm, fit_emd
from .errors import BoundaryDraw, InvalidInputError, ShapeError
from .linalg import entrywise_norm, pinv, rank_constrained_solve, svd, svd_truncate
from .lowrank import (
    CurFactors,
    Factorization,
    FitConfig,
    bicriteria_fit,
    cur_decompose,
    fit_input_sparsity,
    fit_lp,
    fit_polyklogd,
    fit_rank_r_B,
    fit_subset_enum,
    solve_sketched_core,
)
from .regression import l1_regress, l1_regress_oracle, multi_response_regress
from .sketching import SketchSpec, lewis_sampler, lewis_weights, make_dense_sketch, make_sparse_sketch

__version__ = "0.1.0"
