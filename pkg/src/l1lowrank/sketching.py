"""Random sketches: dense and sparse p-stable transforms, limited-independence
rows from a polynomial hash, and Lewis-weight row sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BoundaryDraw, InvalidInputError, ShapeError

MERSENNE_61 = (1 << 61) - 1
_M61 = np.uint64(MERSENNE_61)
_LO32 = np.uint64(0xFFFFFFFF)
_LO29 = np.uint64((1 << 29) - 1)
_UNIFORM_BITS = 52

KINDS = ("dense-stable", "sparse-stable", "lewis-sampling")


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


# --------------------------------------------------------------------------
# p-stable variates


def sample_stable(p: float, u1: float, u2: float = 0.5) -> float:
    """Standard symmetric p-stable variate from two uniforms in (0, 1).

    p = 1 is the Cauchy inverse CDF ``tan(pi (u1 - 1/2))``; p = 2 is a unit
    Gaussian by Box-Muller; 1 < p < 2 uses the Chambers-Mallows-Stuck map.
    """
    if not 1.0 <= p <= 2.0:
        raise InvalidInputError(f"p must lie in [1, 2], got {p}")
    if not (0.0 < u1 < 1.0 and 0.0 < u2 < 1.0):
        raise BoundaryDraw(f"uniforms must be strictly inside (0, 1): {u1}, {u2}")
    return float(stable_from_uniforms(p, np.float64(u1), np.float64(u2)))


def stable_from_uniforms(p: float, u1, u2):
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if p == 1.0:
        return np.tan(np.pi * (u1 - 0.5))
    if p == 2.0:
        return np.sqrt(-2.0 * np.log(u2)) * np.cos(2.0 * np.pi * u1)
    v = np.pi * (u1 - 0.5)
    w = -np.log(u2)
    return np.sin(p * v) / np.cos(v) ** (1.0 / p) * (np.cos((1.0 - p) * v) / w) ** ((1.0 - p) / p)


def open_uniforms(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 52 random bits."""
    return (rng.integers(0, 1 << _UNIFORM_BITS, size=size).astype(float) + 0.5) / float(1 << _UNIFORM_BITS)


def stable_variates(rng: np.random.Generator, p: float, size) -> np.ndarray:
    u1 = open_uniforms(rng, size)
    u2 = open_uniforms(rng, size) if p != 1.0 else np.full(size, 0.5)
    return stable_from_uniforms(p, u1, u2)


# --------------------------------------------------------------------------
# sketch specifications


@dataclass(frozen=True)
class SketchSpec:
    kind: str
    rows: int
    p: float = 1.0
    scale: float = 1.0
    independence: int | None = None  # None means fully independent
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown sketch kind {self.kind!r}")
        if self.rows < 1:
            raise InvalidInputError("sketch rows must be >= 1")
        if not self.scale > 0:
            raise InvalidInputError("sketch scale must be positive")
        if not 1.0 <= self.p <= 2.0:
            raise InvalidInputError(f"p must lie in [1, 2], got {self.p}")
        if self.independence is not None and self.independence < 2:
            raise InvalidInputError("w-wise independence needs w >= 2")


@dataclass(frozen=True)
class SparseSketch:
    """``m x n`` sketch with one nonzero per column: ``bucket[j]`` holds the
    row of column ``j`` and ``value[j]`` its (already scaled) entry."""

    m: int
    n: int
    bucket: np.ndarray
    value: np.ndarray
    scale: float = 1.0

    @property
    def shape(self):
        return (self.m, self.n)

    def todense(self) -> np.ndarray:
        out = np.zeros((self.m, self.n))
        out[self.bucket, np.arange(self.n)] = self.value
        return out

    def columns(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        out = np.zeros((self.m, idx.size))
        out[self.bucket[idx], np.arange(idx.size)] = self.value[idx]
        return out


def make_dense_sketch(spec: SketchSpec, n: int) -> np.ndarray:
    if spec.kind != "dense-stable":
        raise InvalidInputError(f"expected a dense-stable spec, got {spec.kind}")
    if spec.independence is None:
        raw = stable_variates(rng_for(spec.seed), spec.p, (spec.rows, n))
        return spec.scale * raw
    return HashedStableSketch(spec.rows, spec.independence, spec.p, spec.seed, spec.scale).dense(n)


def make_sparse_sketch(spec: SketchSpec, n: int) -> SparseSketch:
    if spec.kind != "sparse-stable":
        raise InvalidInputError(f"expected a sparse-stable spec, got {spec.kind}")
    rng = rng_for(spec.seed)
    bucket = rng.integers(0, spec.rows, size=n)
    value = spec.scale * stable_variates(rng, spec.p, n)
    return SparseSketch(spec.rows, n, bucket, value, spec.scale)


def apply_sparse(sketch: SparseSketch, A) -> np.ndarray:
    """``sketch @ A`` touching each stored entry of ``A`` once.

    Dense and scipy-sparse inputs holding the same matrix give bit-identical
    results: contributions reach every output cell in increasing row order.
    """
    if sp.issparse(A):
        if A.shape[0] != sketch.n:
            raise ShapeError(f"sketch is {sketch.shape}, A is {A.shape}")
        coo = sp.coo_matrix(A.tocsr())
        out = np.zeros((sketch.m, A.shape[1]))
        np.add.at(out, (sketch.bucket[coo.row], coo.col), sketch.value[coo.row] * coo.data)
        return out
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape[0] != sketch.n:
        raise ShapeError(f"sketch is {sketch.shape}, A is {A.shape}")
    out = np.zeros((sketch.m, A.shape[1]))
    np.add.at(out, sketch.bucket, sketch.value[:, None] * A)
    return out


def sketch_left(S, A) -> np.ndarray:
    """``S @ A`` for a dense, sparse, hashed, or sampling sketch ``S``."""
    if isinstance(S, SparseSketch):
        return apply_sparse(S, A)
    if isinstance(S, SamplingMatrix):
        return S.apply(A.toarray() if sp.issparse(A) else A)
    if isinstance(S, HashedStableSketch):
        S = S.dense(A.shape[0])
    if sp.issparse(A):
        return np.asarray((A.T @ np.asarray(S).T).T)
    return np.asarray(S) @ A


def sketch_right(A, St) -> np.ndarray:
    """``A @ St.T``; right sketches are stored transposed (rows x d)."""
    if isinstance(St, SparseSketch):
        if sp.issparse(A):
            return apply_sparse(St, A.T.tocsr()).T
        return apply_sparse(St, np.asarray(A).T).T
    if isinstance(St, (SamplingMatrix, HashedStableSketch)):
        return sketch_left(St, A.T.tocsr() if sp.issparse(A) else np.asarray(A).T).T
    if sp.issparse(A):
        return np.asarray(A @ np.asarray(St).T)
    return np.asarray(A) @ np.asarray(St).T


def densify(S, n: int | None = None) -> np.ndarray:
    if isinstance(S, (SparseSketch, SamplingMatrix)):
        return S.todense()
    if isinstance(S, HashedStableSketch):
        return S.dense(n)
    return np.asarray(S)


# --------------------------------------------------------------------------
# limited independence


def mulmod61(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a * b mod (2^61 - 1)`` for uint64 arrays with entries below 2^61."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    a_lo, a_hi = a & _LO32, a >> np.uint64(32)
    b_lo, b_hi = b & _LO32, b >> np.uint64(32)
    lo = a_lo * b_lo
    mid = a_lo * b_hi + a_hi * b_lo
    hi = a_hi * b_hi
    # 2^64 = 8 and 2^61 = 1 (mod p)
    total = (hi << np.uint64(3)) + (mid >> np.uint64(29)) + ((mid & _LO29) << np.uint64(32))
    total = (total & _M61) + (total >> np.uint64(61))
    total = total + (lo & _M61) + (lo >> np.uint64(61))
    total = (total & _M61) + (total >> np.uint64(61))
    return np.where(total >= _M61, total - _M61, total)


def addmod61(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = np.asarray(a, dtype=np.uint64) + np.asarray(b, dtype=np.uint64)
    return np.where(s >= _M61, s - _M61, s)


def poly_hash(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Horner evaluation of degree-(w-1) polynomials over GF(2^61 - 1).

    ``coeffs`` has shape (..., w) with the leading coefficient last; ``x`` is
    broadcast against the leading dimensions of ``coeffs``.
    """
    x = np.asarray(x, dtype=np.uint64) % _M61
    h = np.broadcast_to(coeffs[..., -1:], np.broadcast_shapes(coeffs[..., -1:].shape, x.shape)).copy()
    for j in range(coeffs.shape[-1] - 2, -1, -1):
        h = addmod61(mulmod61(h, x), coeffs[..., j : j + 1])
    return h


def hash_to_uniform(h: np.ndarray) -> np.ndarray:
    top = (np.asarray(h, dtype=np.uint64) >> np.uint64(61 - _UNIFORM_BITS)).astype(float)
    return (top + 0.5) / float(1 << _UNIFORM_BITS)


def _hash_coefficients(seed: int, w: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, MERSENNE_61, size=(2, w), dtype=np.uint64)


class HashedStableSketch:
    """``rows x n`` stable sketch; row ``r`` is a w-wise independent sequence
    generated from its own child seed, so any column is computable on demand
    without storing the matrix."""

    def __init__(self, rows: int, w: int, p: float = 1.0, seed: int = 0, scale: float = 1.0):
        if w < 2:
            raise InvalidInputError("w-wise independence needs w >= 2")
        self.rows, self.w, self.p, self.seed, self.scale = rows, w, p, seed, scale
        self._coeffs = np.stack([_hash_coefficients(derive_seed(seed, r), w) for r in range(rows)])

    @property
    def stored_words(self) -> int:
        return int(self._coeffs.size)

    def uniforms(self, idx) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(idx, dtype=np.uint64).reshape(1, 1, -1) + np.uint64(1)
        u = hash_to_uniform(poly_hash(self._coeffs, x))
        return u[:, 0], u[:, 1]

    def columns(self, idx) -> np.ndarray:
        u1, u2 = self.uniforms(idx)
        return self.scale * stable_from_uniforms(self.p, u1, u2)

    def column(self, j: int) -> np.ndarray:
        return self.columns([j])[:, 0]

    def dense(self, n: int) -> np.ndarray:
        return self.columns(np.arange(n))


def limited_indep_row(seed: int, w: int, n: int, p: float = 1.0) -> np.ndarray:
    """``n`` stable variates, any ``w`` of them jointly independent."""
    coeffs = _hash_coefficients(seed, w)
    x = np.arange(1, n + 1, dtype=np.uint64)
    u1 = hash_to_uniform(poly_hash(coeffs[0], x))
    u2 = hash_to_uniform(poly_hash(coeffs[1], x))
    return stable_from_uniforms(p, u1, u2)


# --------------------------------------------------------------------------
# Lewis weights


@dataclass
class LewisState:
    weights: np.ndarray
    p: float
    fixed_point_residual: float
    iterations: int = 0
    converged: bool = False
    history: list = field(default_factory=list)


def _lewis_quadratic_forms(A: np.ndarray, w: np.ndarray, p: float) -> np.ndarray:
    """``a_i^T (A^T W^{1-2/p} A)^{-1} a_i`` for every row."""
    active = w > 0
    scale = np.zeros_like(w)
    scale[active] = w[active] ** (1.0 - 2.0 / p)
    G = (A * scale[:, None]).T @ A
    if np.linalg.matrix_rank(G) < G.shape[0]:
        G = G + 1e-10 * np.linalg.norm(G) * np.eye(G.shape[0])
    Ginv_At = np.linalg.solve(G, A.T)
    return np.einsum("ij,ji->i", A, Ginv_At)


def lewis_weights(A, p: float = 1.0, max_iters: int | None = None, tol: float = 1e-8) -> LewisState:
    """l_p Lewis weights by the fixed-point iteration
    ``w_i <- (a_i^T (A^T W^{1-2/p} A)^{-1} a_i)^{p/2}``.

    The residual is the max-norm gap ``|a_i^T (...)^{-1} a_i - w_i^{2/p}|``
    of the returned weights. Rows of zeros get weight zero.
    """
    A = np.asarray(A, dtype=float)
    n, d = A.shape
    if not 1.0 <= p < 4.0:
        raise InvalidInputError(f"p must lie in [1, 4), got {p}")
    if max_iters is None:
        max_iters = math.ceil(math.log2(max(n, 2))) + 16
    nonzero = np.any(A != 0, axis=1)
    if not nonzero.any():
        return LewisState(np.zeros(n), p, 0.0, 0, True, [0.0])
    w = np.where(nonzero, 1.0, 0.0)
    best_w, best_res, history = w, np.inf, []
    for it in range(max_iters + 1):
        q = _lewis_quadratic_forms(A, w, p)
        res = float(np.max(np.abs(q - w ** (2.0 / p))))
        history.append(res)
        if res < best_res:
            best_w, best_res = w, res
        if res <= tol or it == max_iters:
            break
        w = np.where(nonzero, np.maximum(q, 0.0) ** (p / 2.0), 0.0)
    return LewisState(best_w.copy(), p, best_res, len(history) - 1, best_res <= tol, history)


@dataclass(frozen=True)
class SamplingMatrix:
    """Rows ``selected`` of an ``n``-row matrix, each multiplied by ``rescale``."""

    selected: np.ndarray
    rescale: np.ndarray
    n: int
    p: float = 1.0

    @property
    def N(self) -> int:
        return int(self.selected.size)

    def apply(self, A) -> np.ndarray:
        A = np.asarray(A)
        return self.rescale[:, None] * A[self.selected]

    def todense(self) -> np.ndarray:
        D = np.zeros((self.N, self.n))
        D[np.arange(self.N), self.selected] = self.rescale
        return D


def lewis_sampler(state: LewisState, N: int, seed: int = 0) -> SamplingMatrix:
    """``N`` i.i.d. row draws with probability proportional to the weights;
    row ``i`` is rescaled by ``(N q_i)^{-1/p}``."""
    if N < 1:
        raise InvalidInputError("sample count N must be >= 1")
    w = np.asarray(state.weights, dtype=float)
    total = w.sum()
    if not total > 0:
        raise InvalidInputError("all Lewis weights are zero")
    q = w / total
    idx = rng_for(seed).choice(w.size, size=N, p=q)
    rescale = (N * q[idx]) ** (-1.0 / state.p)
    return SamplingMatrix(idx, rescale, w.size, state.p)
