"""Dense linear-algebra kernels: SVD, pseudoinverse, rank-k truncation,
the generalized rank-constrained Frobenius solve, and entrywise norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeError

FROBENIUS = "fro"


@dataclass(frozen=True)
class SvdResult:
    left_vectors: np.ndarray
    singular_values: np.ndarray
    right_vectors: np.ndarray

    @property
    def rank_one_terms(self) -> int:
        return len(self.singular_values)

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def _as_finite(A, name="A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError(f"{name} must be 2-d, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return A


def svd(A) -> SvdResult:
    """Thin SVD with a deterministic sign convention.

    Each right singular vector is flipped so that its largest-magnitude
    entry is positive; this keeps downstream factors reproducible when the
    same subspace is recomputed from inputs that differ by rounding.
    """
    A = _as_finite(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    V = Vt.T
    if V.size:
        pivot = np.argmax(np.abs(V), axis=0)
        signs = np.sign(V[pivot, np.arange(V.shape[1])])
        signs[signs == 0] = 1.0
        U = U * signs
        V = V * signs
    return SvdResult(U, s, V)


def default_rank_tol(shape) -> float:
    return max(shape) * np.finfo(float).eps


def numerical_rank(s: np.ndarray, shape, rank_tol: float | None = None) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    tol = default_rank_tol(shape) if rank_tol is None else rank_tol
    return int(np.sum(s > tol * s[0]))


def svd_truncate(A, k: int) -> np.ndarray:
    """Best rank-``k`` approximation of ``A`` in Frobenius norm."""
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    res = svd(A)
    k = min(k, res.rank_one_terms)
    return (res.left_vectors[:, :k] * res.singular_values[:k]) @ res.right_vectors[:, :k].T


def pinv(A, rank_tol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values below
    ``rank_tol * sigma_max`` are treated as zero."""
    A = _as_finite(A)
    res = svd(A)
    r = numerical_rank(res.singular_values, A.shape, rank_tol)
    V, s, U = res.right_vectors[:, :r], res.singular_values[:r], res.left_vectors[:, :r]
    return (V / s) @ U.T


def rank_constrained_solve(A, B, C, k: int, rank_tol: float | None = None) -> np.ndarray:
    """Rank-``k`` ``X`` minimizing ``||A - B X C||_F``.

    Computes ``B^+ (U_B U_B^T A V_C V_C^T)_k C^+``. Because the projectors
    are orthonormal, the truncation is taken on the small core
    ``U_B^T A V_C`` and mapped back, which is algebraically identical.
    """
    A, B, C = _as_finite(A), _as_finite(B, "B"), _as_finite(C, "C")
    n, d = A.shape
    if B.shape[0] != n or C.shape[1] != d:
        raise ShapeError(f"A {A.shape}, B {B.shape}, C {C.shape} are incompatible")
    if k < 1 or k > min(B.shape[1], C.shape[0]):
        raise InvalidInputError(f"k={k} must lie in [1, min(p, q)]")
    sb, sc = svd(B), svd(C)
    rb = numerical_rank(sb.singular_values, B.shape, rank_tol)
    rc = numerical_rank(sc.singular_values, C.shape, rank_tol)
    p, q = B.shape[1], C.shape[0]
    if rb == 0 or rc == 0:
        return np.zeros((p, q))
    Ub, Vb, s_b = sb.left_vectors[:, :rb], sb.right_vectors[:, :rb], sb.singular_values[:rb]
    Uc, Vc, s_c = sc.left_vectors[:, :rc], sc.right_vectors[:, :rc], sc.singular_values[:rc]
    core = Ub.T @ A @ Vc
    core_k = svd_truncate(core, k)
    return (Vb / s_b) @ core_k @ (Uc / s_c).T


def split_rank_k(X, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Factor a rank-<=k matrix as ``left @ right`` with ``left`` having
    orthonormal columns and ``right = Sigma V^T`` (k rows each)."""
    res = svd(X)
    k_eff = min(k, res.rank_one_terms)
    left = np.zeros((X.shape[0], k))
    right = np.zeros((k, X.shape[1]))
    left[:, :k_eff] = res.left_vectors[:, :k_eff]
    right[:k_eff] = res.singular_values[:k_eff, None] * res.right_vectors[:, :k_eff].T
    return left, right


def entrywise_norm(A, p=1.0) -> float:
    """Entrywise ``l_p`` norm for ``p`` in [1, 2], or Frobenius for ``"fro"``."""
    A = np.asarray(A, dtype=float)
    if isinstance(p, str):
        if p != FROBENIUS:
            raise InvalidInputError(f"unknown norm marker {p!r}")
        return float(np.sqrt(np.sum(A * A)))
    if not 1.0 <= p <= 2.0:
        raise InvalidInputError(f"p must lie in [1, 2], got {p}")
    a = np.abs(A)
    if p == 1.0:
        return float(a.sum())
    return float(np.sum(a**p) ** (1.0 / p))
