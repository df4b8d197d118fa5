"""Hard-instance and planted-instance generators with OPT upper bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError
from .sketching import rng_for

KINDS = ("cauchy-hard", "subset-hard", "ose-hard", "heuristic-counterexample", "planted", "rank-exact")


@dataclass(frozen=True)
class InstanceSpec:
    kind: str
    n: int = 0
    d: int = 0
    k: int = 1
    gamma: float = 0.5
    eps: float = 0.25
    delta: int = 4
    seed: int = 0
    outlier_frac: float = 0.05
    outlier_scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        self.validate()

    def validate(self):
        kind = self.kind
        if kind not in KINDS:
            raise InvalidInputError(f"kind must be one of {KINDS}, got {kind!r}")
        bad = []
        if self.k < 1:
            bad.append("k >= 1")
        if kind in ("cauchy-hard", "subset-hard") and self.d < 2:
            bad.append("d >= 2")
        if kind == "ose-hard" and self.n < 1:
            bad.append("n >= 1")
        if kind == "heuristic-counterexample":
            if self.n < 1:
                bad.append("n >= 1")
            if not 0 < self.eps < 0.5:
                bad.append("eps in (0, 0.5)")
            if self.gamma < 0:
                bad.append("gamma >= 0")
        if kind in ("planted", "rank-exact"):
            if self.n < 1 or self.d < 1:
                bad.append("n, d >= 1")
            if self.k > min(self.n, self.d):
                bad.append("k <= min(n, d)")
            if not 0 <= self.outlier_frac <= 1:
                bad.append("outlier_frac in [0, 1]")
        if bad:
            raise InvalidInputError(f"{kind}: need " + ", ".join(bad))

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        size = {"cauchy-hard": f"d{self.d}", "subset-hard": f"d{self.d}",
                "heuristic-counterexample": f"n{self.n}"}.get(self.kind, f"n{self.n}-d{self.d}")
        return f"{self.kind}-{size}-k{self.k}-s{self.seed}"

    def to_dict(self) -> dict:
        return asdict(self)


def cauchy_hard(d: int) -> np.ndarray:
    """``alpha * e_1 1^T + I_d`` with ``alpha = ceil(ln d)``."""
    A = np.eye(d)
    A[0] += math.ceil(math.log(d))
    return A


def subset_hard(d: int) -> np.ndarray:
    """``(d-1) x d``: a column of ones followed by ``I_{d-1}``."""
    return np.hstack([np.ones((d - 1, 1)), np.eye(d - 1)])


def ose_hard(n: int, k: int, seed: int = 0) -> np.ndarray:
    """``n x (k+n)``: i.i.d. Gaussian ``n x k`` block then ``I_n``."""
    return np.hstack([rng_for(seed).standard_normal((n, k)), np.eye(n)])


def heuristic_counterexample(n: int, gamma: float = 0.5, eps: float = 0.25) -> np.ndarray:
    """``diag(n^(2+gamma), n^(1.5+eps), B, B)`` with ``B`` the all-ones
    ``n x n`` block."""
    size = 2 * n + 2
    A = np.zeros((size, size))
    A[0, 0] = float(n) ** (2 + gamma)
    A[1, 1] = float(n) ** (1.5 + eps)
    A[2 : 2 + n, 2 : 2 + n] = 1.0
    A[2 + n :, 2 + n :] = 1.0
    return A


def planted_parts(spec: InstanceSpec):
    """``(low_rank, noise)`` for planted and rank-exact instances."""
    rng = rng_for(spec.seed)
    low = rng.standard_normal((spec.n, spec.k)) @ rng.standard_normal((spec.k, spec.d))
    noise = np.zeros_like(low)
    if spec.kind == "planted":
        mask = rng.random(low.shape) < spec.outlier_frac
        noise[mask] = spec.outlier_scale * rng.standard_cauchy(int(mask.sum()))
    return low, noise


def gen_instance(spec: InstanceSpec) -> np.ndarray:
    spec.validate()
    if spec.kind == "cauchy-hard":
        return cauchy_hard(spec.d)
    if spec.kind == "subset-hard":
        return subset_hard(spec.d)
    if spec.kind == "ose-hard":
        return ose_hard(spec.n, spec.k, spec.seed)
    if spec.kind == "heuristic-counterexample":
        return heuristic_counterexample(spec.n, spec.gamma, spec.eps)
    low, noise = planted_parts(spec)
    return low + noise


def opt_bound(spec: InstanceSpec, k: int | None = None) -> float:
    """An upper bound on the rank-k l1 OPT witnessed by an explicit
    rank-k matrix; ``k`` defaults to ``spec.k``."""
    k = spec.k if k is None else k
    if spec.kind == "cauchy-hard":
        # keep the first row and k-1 identity rows
        return float(max(spec.d - k, 0))
    if spec.kind == "subset-hard":
        # ones column (then identity columns) reproduced exactly
        return float(max(spec.d - k, 0))
    if spec.kind == "ose-hard":
        # the Gaussian block exactly, the identity not at all
        return float(spec.n) if k >= spec.k else math.inf
    if spec.kind == "heuristic-counterexample":
        n = spec.n
        pieces = sorted([n ** (2 + spec.gamma), n ** (1.5 + spec.eps), float(n * n), float(n * n)],
                        reverse=True)
        return float(sum(pieces[k:]))
    low, noise = planted_parts(spec)
    return float(np.abs(noise).sum()) if k >= spec.k else math.inf
