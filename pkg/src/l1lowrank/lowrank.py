"""Entrywise l1 / lp low-rank fitting by oblivious sketching.

Every fit is a pure function of ``(A, k, cfg)``; all randomness is derived
from ``cfg.seed`` through fixed per-sketch tags, so repeated calls are
bit-identical.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .errors import InvalidInputError, ShapeError
from .linalg import entrywise_norm, pinv, rank_constrained_solve, split_rank_k
from .regression import multi_response_regress, row_fits
from .sketching import (
    HashedStableSketch,
    SketchSpec,
    SparseSketch,
    derive_seed,
    lewis_sampler,
    lewis_weights,
    make_dense_sketch,
    make_sparse_sketch,
    sketch_left,
    sketch_right,
)

PRESETS = ("practical", "theory")
MAX_SUBSETS = math.comb(14, 6)

# sketch tags; changing these changes every seeded output
_TAG_S, _TAG_R, _TAG_T1, _TAG_T2, _TAG_STAGE1 = 1, 2, 3, 4, 5
_TAG_B_S, _TAG_B_R, _TAG_B_T1, _TAG_B_T2 = 11, 12, 13, 14
_TAG_BICRITERIA = 21
_TAG_CUR = 31
_TAG_SUBSET = 41


@dataclass(frozen=True)
class FitConfig:
    seed: int = 0
    preset: str = "practical"
    p: float = 1.0
    size_factor: float = 4.0
    t2: int | None = None
    independence: int = 8
    regress_tol: float = 1e-9
    regress_max_iters: int = 500

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise InvalidInputError(f"unknown preset {self.preset!r}")
        if not 1.0 <= self.p < 2.0:
            raise InvalidInputError(f"p must lie in [1, 2), got {self.p}")


@dataclass(frozen=True)
class SketchSizes:
    s: int
    r: int
    t1: int
    t2: int
    dense: int
    sample: int


def practical_size(k: int, factor: float = 4.0) -> int:
    return math.ceil(factor * k * math.log2(k + 2))


def sketch_sizes(k: int, cfg: FitConfig = FitConfig()) -> SketchSizes:
    """Row counts for every sketch at target rank ``k``.

    ``practical`` uses ``ceil(c k log2(k+2))`` everywhere; ``theory`` uses
    the asymptotic exponents with unit constants (sparse ``(k log k)^5``),
    which is only usable for k <= 2.
    """
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if cfg.preset == "practical":
        m = practical_size(k, cfg.size_factor)
        return SketchSizes(m, m, m, cfg.t2 or m, m, m)
    lg = max(math.log2(k), 1.0)
    sparse = max(k, math.ceil((k * lg) ** 5))
    dense = max(k, math.ceil(k * lg))
    t2 = cfg.t2 or math.ceil((sparse + sparse) * math.log2(sparse + sparse))
    return SketchSizes(sparse, sparse, sparse, t2, dense, dense)


# --------------------------------------------------------------------------
# result types


@dataclass
class Factorization:
    U: np.ndarray
    V: np.ndarray
    k: int
    cost_l1: float
    seed: int = 0
    algo_tag: str = ""
    p: float = 1.0
    info: dict = field(default_factory=dict)

    def product(self) -> np.ndarray:
        return self.U @ self.V

    def recompute_cost(self, A) -> float:
        return entrywise_norm(self.product() - _dense(A), self.p)


@dataclass
class CurFactors:
    C: np.ndarray
    U: np.ndarray
    R: np.ndarray
    col_index: np.ndarray
    col_scale: np.ndarray
    row_index: np.ndarray
    row_scale: np.ndarray
    k: int
    cost_l1: float = 0.0
    p: float = 1.0

    def product(self) -> np.ndarray:
        return self.C @ self.U @ self.R


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _check_matrix(A):
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=float)
        if not np.all(np.isfinite(A.data)):
            raise InvalidInputError("A has non-finite entries")
        return A
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError(f"A must be 2-d, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("A has non-finite entries")
    return A


def _is_zero(A) -> bool:
    return A.nnz == 0 or not np.any(A.data) if sp.issparse(A) else not np.any(A)


def _build(A, U, V, k, cfg: FitConfig, tag: str, **info) -> Factorization:
    cost = entrywise_norm(U @ V - _dense(A), cfg.p)
    return Factorization(U, V, k, cost, cfg.seed, tag, cfg.p, dict(info))


def _zero_fit(A, k, cfg, tag) -> Factorization:
    n, d = A.shape
    return Factorization(np.zeros((n, k)), np.zeros((k, d)), k, 0.0, cfg.seed, tag, cfg.p, {})


# --------------------------------------------------------------------------
# operands: a plain matrix, or a rank-r matrix kept in factored form


class Factored:
    """``U_B @ V_B`` never materialized; sketches act on the r-dim core."""

    def __init__(self, U_B, V_B):
        self.U_B = np.asarray(U_B, dtype=float)
        self.V_B = np.asarray(V_B, dtype=float)
        self.shape = (self.U_B.shape[0], self.V_B.shape[1])

    def left(self, S) -> np.ndarray:
        return sketch_left(S, self.U_B) @ self.V_B

    def right(self, Rt) -> np.ndarray:
        return self.U_B @ sketch_right(self.V_B, Rt)

    def both(self, T1, T2t) -> np.ndarray:
        return sketch_left(T1, self.U_B) @ sketch_right(self.V_B, T2t)

    def dense(self) -> np.ndarray:
        return self.U_B @ self.V_B


class Plain:
    def __init__(self, A):
        self.A = A
        self.shape = A.shape

    def left(self, S) -> np.ndarray:
        return sketch_left(S, self.A)

    def right(self, Rt) -> np.ndarray:
        return sketch_right(self.A, Rt)

    def both(self, T1, T2t) -> np.ndarray:
        return sketch_right(sketch_left(T1, self.A), T2t)

    def dense(self) -> np.ndarray:
        return _dense(self.A)


def _operand(A_or_B):
    if isinstance(A_or_B, (Factored, Plain)):
        return A_or_B
    if isinstance(A_or_B, tuple):
        return Factored(*A_or_B)
    return Plain(A_or_B)


# --------------------------------------------------------------------------
# the sketched Frobenius core


def factors_from_summaries(L, N, M, D, C, k: int):
    """Rank-k factors from the sketch summaries ``L = T1 A R``,
    ``N = S A T2``, ``M = T1 A T2``, ``D = S A`` and optional ``C = A R``.

    ``X = L^+ (U_L U_L^T M V_N V_N^T)_k N^+ = Uh Sh Vh^T``; returns
    ``(C Uh, Sh Vh^T D, X)`` with the first entry ``None`` when ``C`` is.
    """
    k_eff = min(k, L.shape[1], N.shape[0])
    X = rank_constrained_solve(M, L, N, k_eff)
    left, right = split_rank_k(X, k)
    V = right @ D
    U = None if C is None else C @ left
    return U, V, X


def solve_sketched_core(AR, SA, T1, T2t, A_or_B, k: int):
    """``(X, Y)`` with ``X @ Y`` the rank-k minimizer of
    ``||T1 AR X Y SA T2 - T1 A T2||_F``; ``T2`` is passed transposed."""
    op = _operand(A_or_B)
    if min(AR.shape[1], SA.shape[0]) < k:
        raise InvalidInputError("k exceeds the sketch dimensions")
    L = sketch_left(T1, AR)
    N = sketch_right(SA, T2t)
    M = op.both(T1, T2t)
    Xhat = rank_constrained_solve(M, L, N, k)
    return split_rank_k(Xhat, k)


@dataclass
class CoreSketches:
    """Left sketches ``S``, ``T1`` (rows x n); right sketches ``R``, ``T2``
    stored transposed (rows x d)."""

    S: object
    R: object
    T1: object
    T2: object


@dataclass
class PolyBundle:
    stage1: object
    core: CoreSketches


def _sketch_core_fit(op, k, sk: CoreSketches):
    SA = op.left(sk.S)
    AR = op.right(sk.R)
    L = sketch_left(sk.T1, AR)
    N = sketch_right(SA, sk.T2)
    M = op.both(sk.T1, sk.T2)
    U, V, X = factors_from_summaries(L, N, M, SA, AR, k)
    return U, V


def _dense_spec(rows, cfg, tag):
    return SketchSpec("dense-stable", rows, cfg.p, 1.0, None, derive_seed(cfg.seed, tag))


def _sparse_spec(rows, cfg, tag):
    return SketchSpec("sparse-stable", rows, cfg.p, 1.0, None, derive_seed(cfg.seed, tag))


def input_sparsity_sketches(n: int, d: int, k: int, cfg: FitConfig) -> CoreSketches:
    z = sketch_sizes(k, cfg)
    return CoreSketches(
        S=make_sparse_sketch(_sparse_spec(z.s, cfg, _TAG_S), n),
        R=make_sparse_sketch(_sparse_spec(z.r, cfg, _TAG_R), d),
        T1=make_sparse_sketch(_sparse_spec(z.t1, cfg, _TAG_T1), n),
        T2=make_dense_sketch(_dense_spec(z.t2, cfg, _TAG_T2), d),
    )


def rank_r_sketches(n: int, d: int, k: int, cfg: FitConfig) -> CoreSketches:
    z = sketch_sizes(k, cfg)
    return CoreSketches(
        S=make_dense_sketch(_dense_spec(z.dense, cfg, _TAG_B_S), n),
        R=make_dense_sketch(_dense_spec(z.dense, cfg, _TAG_B_R), d),
        T1=make_dense_sketch(_dense_spec(z.dense, cfg, _TAG_B_T1), n),
        T2=make_dense_sketch(_dense_spec(cfg.t2 or z.dense, cfg, _TAG_B_T2), d),
    )


def polyklogd_sketches(n: int, d: int, k: int, cfg: FitConfig) -> PolyBundle:
    z = sketch_sizes(k, cfg)
    stage1 = make_sparse_sketch(_sparse_spec(z.s, cfg, _TAG_STAGE1), n)
    return PolyBundle(stage1, rank_r_sketches(n, d, k, cfg))


def turnstile_sketches(n: int, d: int, k: int, cfg: FitConfig) -> CoreSketches:
    """Dense Cauchy family of the streaming and distributed protocols:
    ``S`` and ``T1`` have w-wise independent rows generated on demand,
    ``R`` and ``T2`` are fully independent."""
    z = sketch_sizes(k, cfg)
    w = cfg.independence
    return CoreSketches(
        S=HashedStableSketch(z.s, w, cfg.p, derive_seed(cfg.seed, _TAG_S)),
        R=make_dense_sketch(_dense_spec(z.r, cfg, _TAG_R), d),
        T1=HashedStableSketch(z.t1, w, cfg.p, derive_seed(cfg.seed, _TAG_T1)),
        T2=make_dense_sketch(_dense_spec(z.t2, cfg, _TAG_T2), d),
    )


def rowupdate_sketches(n: int, d: int, k: int, cfg: FitConfig) -> PolyBundle:
    """Row-update / row-partition family: a hashed stage-1 sketch ``S'``
    plus the turnstile core sketches."""
    z = sketch_sizes(k, cfg)
    stage1 = HashedStableSketch(z.s, cfg.independence, cfg.p, derive_seed(cfg.seed, _TAG_STAGE1))
    return PolyBundle(stage1, turnstile_sketches(n, d, k, cfg))


# --------------------------------------------------------------------------
# algorithms


def bicriteria_fit(A, k: int, spec: SketchSpec | None = None, cfg: FitConfig = FitConfig()) -> Factorization:
    """Rank-m fit: ``V = S A`` and each row of ``U`` an l1 fit of the row
    of ``A`` onto ``V``."""
    A = _check_matrix(A)
    if spec is None:
        spec = SketchSpec("dense-stable", sketch_sizes(k, cfg).dense, cfg.p, 1.0, None,
                          derive_seed(cfg.seed, _TAG_BICRITERIA))
    if spec.rows < k:
        raise InvalidInputError(f"sketch rows {spec.rows} < k={k}")
    m = spec.rows
    if _is_zero(A):
        return _zero_fit(A, m, cfg, "bicriteria")
    n = A.shape[0]
    S = make_sparse_sketch(spec, n) if spec.kind == "sparse-stable" else make_dense_sketch(spec, n)
    V = sketch_left(S, A)
    U = row_fits(_dense(A), V, spec.p, tol=cfg.regress_tol, max_iters=cfg.regress_max_iters)
    return _build(A, U, V, m, cfg, "bicriteria")


def fit_input_sparsity(A, k: int, cfg: FitConfig = FitConfig(), sketches: CoreSketches | None = None) -> Factorization:
    """Sparse ``S, R, T1`` and dense ``T2``; returns ``(AR X, Y SA)``."""
    A = _check_matrix(A)
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if _is_zero(A):
        return _zero_fit(A, k, cfg, "input-sparsity")
    n, d = A.shape
    sk = sketches or input_sparsity_sketches(n, d, k, cfg)
    U, V = _sketch_core_fit(Plain(A), k, sk)
    return _build(A, U, V, k, cfg, "input-sparsity")


def fit_rank_r_B(U_B, V_B, k: int, cfg: FitConfig = FitConfig(),
                 sketches: CoreSketches | None = None) -> Factorization:
    """Rank-k fit of ``B = U_B V_B`` using dense sketches applied through
    the factorization."""
    op = Factored(U_B, V_B)
    if k < 1 or k > op.U_B.shape[1]:
        raise InvalidInputError(f"need 1 <= k <= r, got k={k}, r={op.U_B.shape[1]}")
    n, d = op.shape
    B = op.dense()
    if not np.any(B):
        return _zero_fit(B, k, cfg, "rank-r")
    sk = sketches or rank_r_sketches(n, d, k, cfg)
    U, V = _sketch_core_fit(op, k, sk)
    return _build(B, U, V, k, cfg, "rank-r")


def polyklogd_stage1(A, k: int, cfg: FitConfig = FitConfig(), stage1=None):
    """``(U_B, V_B)`` with ``V_B = S A`` and rows of ``U_B`` l1 fits."""
    A = _check_matrix(A)
    if stage1 is None:
        stage1 = polyklogd_sketches(A.shape[0], A.shape[1], k, cfg).stage1
    V_B = sketch_left(stage1, A)
    U_B = row_fits(_dense(A), V_B, cfg.p, tol=cfg.regress_tol, max_iters=cfg.regress_max_iters)
    return U_B, V_B


def fit_polyklogd(A, k: int, cfg: FitConfig = FitConfig(), sketches: PolyBundle | None = None) -> Factorization:
    """Two stages: replace ``A`` by its l1 projection ``B`` onto the row
    span of a sparse sketch ``S A``, then fit rank ``k`` to ``B``."""
    A = _check_matrix(A)
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if _is_zero(A):
        return _zero_fit(A, k, cfg, "polyklogd")
    n, d = A.shape
    bundle = sketches or polyklogd_sketches(n, d, k, cfg)
    U_B, V_B = polyklogd_stage1(A, k, cfg, bundle.stage1)
    if U_B.shape[1] < k:
        raise InvalidInputError("stage-1 sketch has fewer rows than k")
    inner = fit_rank_r_B(U_B, V_B, k, cfg, bundle.core)
    Ad = _dense(A)
    return _build(A, inner.U, inner.V, k, cfg, "polyklogd",
                  U_B=U_B, V_B=V_B,
                  stage1_cost=entrywise_norm(U_B @ V_B - Ad, cfg.p),
                  stage2_cost=inner.cost_l1)


def fit_lp(A, k: int, p: float, cfg: FitConfig = FitConfig(), algo: str = "polyklogd") -> Factorization:
    """The same pipelines with p-stable sketches and lp costs."""
    cfg = replace(cfg, p=p)
    fits = {"polyklogd": fit_polyklogd, "input-sparsity": fit_input_sparsity}
    if algo not in fits:
        raise InvalidInputError(f"fit_lp supports {sorted(fits)}, got {algo!r}")
    f = fits[algo](A, k, cfg)
    f.algo_tag = "lp" if p != 1.0 else f.algo_tag
    return f


def _lewis_sample(M, count, p, seed):
    return lewis_sampler(lewis_weights(M, p), count, seed)


def cur_decompose(A, k: int, cfg: FitConfig = FitConfig(), max_retries: int = 8) -> CurFactors:
    """``C = A D2``, ``U = (B2 D2)^+ (D1 B1)^+``, ``R = D1 A`` with ``D1``
    and ``D2`` Lewis-weight samplers built on the polyklogd factors."""
    A = _dense(_check_matrix(A))
    n, d = A.shape
    z = sketch_sizes(k, cfg)
    if not np.any(A):
        cols, rows = np.arange(min(z.sample, d)), np.arange(min(z.sample, n))
        return CurFactors(A[:, cols].copy(), np.zeros((cols.size, rows.size)), A[rows].copy(),
                          cols, np.ones(cols.size), rows, np.ones(rows.size), k, 0.0, cfg.p)
    B1 = fit_polyklogd(A, k, cfg).U
    rank_b1 = np.linalg.matrix_rank(B1)
    for attempt in range(max_retries + 1):
        D1 = _lewis_sample(B1, z.sample, cfg.p, derive_seed(cfg.seed, _TAG_CUR, attempt, 1))
        D1B1 = D1.apply(B1)
        if np.linalg.matrix_rank(D1B1) < rank_b1:
            continue
        R = D1.apply(A)
        D1B1_pinv = pinv(D1B1)
        B2 = D1B1_pinv @ R
        rank_b2 = np.linalg.matrix_rank(B2)
        D2 = _lewis_sample(B2.T, z.sample, cfg.p, derive_seed(cfg.seed, _TAG_CUR, attempt, 2))
        B2D2 = D2.apply(B2.T).T
        if np.linalg.matrix_rank(B2D2) < rank_b2:
            continue
        C = D2.apply(A.T).T
        U = pinv(B2D2) @ D1B1_pinv
        cost = entrywise_norm(C @ U @ R - A, cfg.p)
        return CurFactors(C, U, R, D2.selected, D2.rescale, D1.selected, D1.rescale, k, cost, cfg.p)
    raise InvalidInputError(f"sampled blocks stayed degenerate after {max_retries} retries")


def fit_subset_enum(A, k: int, r: int, cfg: FitConfig = FitConfig()) -> Factorization:
    """Best candidate over every ``r``-column subset ``A_R``.

    For each subset, ``D`` and ``T1`` are Lewis samplers of ``A_R`` and
    ``T2`` one of ``(D A)^T``; the Frobenius core gives ``(A_R X, Y D A)``.
    A second candidate keeps ``U = A_R X`` and refits ``V`` by l1
    regression. The candidate with least lp cost wins.
    """
    A = _dense(_check_matrix(A))
    n, d = A.shape
    if r < k or r > 6 or r > d:
        raise InvalidInputError(f"need k <= r <= min(6, d); got k={k}, r={r}, d={d}")
    if math.comb(d, r) > MAX_SUBSETS:
        raise InvalidInputError(f"C({d},{r}) subsets exceeds the desk-scale cap {MAX_SUBSETS}")
    if not np.any(A):
        return _zero_fit(A, k, cfg, "subset-enum")
    z = sketch_sizes(k, cfg)
    best, costs = None, []
    for idx, cols in enumerate(itertools.combinations(range(d), r)):
        AR = A[:, cols]
        if not np.any(AR):
            continue
        lw = lewis_weights(AR, cfg.p)
        D = lewis_sampler(lw, z.sample, derive_seed(cfg.seed, _TAG_SUBSET, idx, 1))
        T1 = lewis_sampler(lw, z.t1, derive_seed(cfg.seed, _TAG_SUBSET, idx, 2))
        DA = D.apply(A)
        if not np.any(DA):
            continue
        T2 = _lewis_sample(DA.T, z.t2, cfg.p, derive_seed(cfg.seed, _TAG_SUBSET, idx, 3))
        k_eff = min(k, r, DA.shape[0])
        Xhat = rank_constrained_solve(T2.apply(T1.apply(A).T).T, T1.apply(AR), T2.apply(DA.T).T, k_eff)
        left, right = split_rank_k(Xhat, k)
        U = AR @ left
        candidates = [(U, right @ DA)]
        if np.any(U):
            candidates.append((U, multi_response_regress(U, A, "l1", cfg.p, cfg.regress_tol,
                                                         cfg.regress_max_iters)))
        for Uc, Vc in candidates:
            cost = entrywise_norm(Uc @ Vc - A, cfg.p)
            costs.append(cost)
            if best is None or cost < best[0]:
                best = (cost, Uc, Vc, cols)
    if best is None:
        return _zero_fit(A, k, cfg, "subset-enum")
    cost, U, V, cols = best
    return Factorization(U, V, k, cost, cfg.seed, "subset-enum", cfg.p,
                         {"columns": cols, "candidate_costs": costs})
