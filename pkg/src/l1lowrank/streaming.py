"""Turnstile and row-update streaming: linear sketch accumulators updated
in place, with the rank-k factors extracted at end of stream."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError, ShapeError
from .lowrank import (
    CoreSketches,
    FitConfig,
    factors_from_summaries,
    practical_size,
    rowupdate_sketches,
    turnstile_sketches,
)
from .regression import row_fits
from .sketching import HashedStableSketch


@dataclass
class TurnstileState:
    n: int
    d: int
    k: int
    cfg: FitConfig
    sketches: CoreSketches
    L: np.ndarray
    N: np.ndarray
    M: np.ndarray
    D: np.ndarray
    C: np.ndarray | None
    update_count: int = 0
    peak_words: int = 0

    def stored_words(self) -> int:
        """Words held excluding ``C``: accumulators, the dense right
        sketches and the hash coefficients of the left ones."""
        sk = self.sketches
        words = self.L.size + self.N.size + self.M.size + self.D.size
        words += np.asarray(sk.R).size + np.asarray(sk.T2).size
        return words + sk.S.stored_words + sk.T1.stored_words

    def _touch(self, extra: int = 0):
        self.peak_words = max(self.peak_words, self.stored_words() + extra)


def space_budget(k: int, d: int, c: float) -> float:
    """``c (k^2 log^3 k + k d log k)`` with ``log k`` floored at 1."""
    lg = max(math.log2(k), 1.0)
    return c * (k * k * lg**3 + k * d * lg)


def turnstile_init(n: int, d: int, k: int, seed: int = 0, want_decomposition: bool = False,
                   cfg: FitConfig | None = None) -> TurnstileState:
    if min(n, d, k) < 1:
        raise InvalidInputError("n, d, k must all be >= 1")
    cfg = FitConfig(seed=seed) if cfg is None else cfg
    sk = turnstile_sketches(n, d, k, cfg)
    s, t1 = sk.S.rows, sk.T1.rows
    r, t2 = np.asarray(sk.R).shape[0], np.asarray(sk.T2).shape[0]
    st = TurnstileState(
        n, d, k, cfg, sk,
        L=np.zeros((t1, r)), N=np.zeros((s, t2)), M=np.zeros((t1, t2)), D=np.zeros((s, d)),
        C=np.zeros((n, r)) if want_decomposition else None,
    )
    st._touch()
    return st


def turnstile_update(state: TurnstileState, x: int, y: int, c: float) -> TurnstileState:
    """Apply ``A[x, y] += c`` to every accumulator."""
    if not (0 <= x < state.n and 0 <= y < state.d):
        raise InvalidInputError(f"update ({x}, {y}) outside {state.n}x{state.d}")
    c = float(c)
    if not math.isfinite(c):
        raise InvalidInputError("update value must be finite")
    sk = state.sketches
    s_col = sk.S.column(x)
    t1_col = sk.T1.column(x)
    r_row = np.asarray(sk.R)[:, y]
    t2_row = np.asarray(sk.T2)[:, y]
    state.L += c * np.outer(t1_col, r_row)
    state.N += c * np.outer(s_col, t2_row)
    state.M += c * np.outer(t1_col, t2_row)
    state.D[:, y] += c * s_col
    if state.C is not None:
        state.C[x] += c * r_row
    state.update_count += 1
    state._touch(s_col.size + t1_col.size)
    return state


def _add_factored(state: TurnstileState, rows: np.ndarray, Y: np.ndarray, V: np.ndarray):
    """Accumulate rows ``Y @ V`` of the streamed matrix (global indices
    ``rows``) without forming them; the product order matches the
    factored batch pipeline."""
    sk = state.sketches
    BR = Y @ (V @ np.asarray(sk.R).T)
    SB = (sk.S.columns(rows) @ Y) @ V
    state.L += sk.T1.columns(rows) @ BR
    state.N += SB @ np.asarray(sk.T2).T
    state.M += (sk.T1.columns(rows) @ Y) @ (V @ np.asarray(sk.T2).T)
    state.D += SB
    if state.C is not None:
        state.C[rows] += BR


def turnstile_finalize(state: TurnstileState):
    """``(V*, U*)``; ``U*`` is ``None`` without the decomposition option."""
    k = state.k
    if not (np.any(state.L) or np.any(state.N) or np.any(state.M) or np.any(state.D)):
        U = None if state.C is None else np.zeros((state.n, k))
        return np.zeros((k, state.d)), U
    U, V, _ = factors_from_summaries(state.L, state.N, state.M, state.D, state.C, k)
    return V, U


# --------------------------------------------------------------------------
# row updates


def default_block_size(k: int) -> int:
    """Four stage-1 sketch heights: a block no taller than the sketch is
    reproduced exactly by its own fit, which would make ``B = A``."""
    return max(4 * practical_size(k), 8)


@dataclass
class RowUpdateState:
    core: TurnstileState
    stage1: HashedStableSketch
    block_size: int
    buffer_rows: list = field(default_factory=list)
    buffer: list = field(default_factory=list)
    seen: set = field(default_factory=set)

    @property
    def update_count(self) -> int:
        return self.core.update_count

    def stored_words(self) -> int:
        return self.core.stored_words() + self.stage1.stored_words + sum(r.size for r in self.buffer)


def rowupdate_init(n: int, d: int, k: int, seed: int = 0, want_decomposition: bool = False,
                   cfg: FitConfig | None = None, block_size: int | None = None) -> RowUpdateState:
    cfg = FitConfig(seed=seed) if cfg is None else cfg
    core = turnstile_init(n, d, k, cfg.seed, want_decomposition, cfg)
    bundle = rowupdate_sketches(n, d, k, cfg)
    core.sketches = bundle.core
    st = RowUpdateState(core, bundle.stage1, block_size or default_block_size(k))
    core.peak_words = st.stored_words()
    return st


def _flush(state: RowUpdateState):
    if not state.buffer:
        return
    rows = np.asarray(state.buffer_rows)
    block = np.stack(state.buffer)
    core = state.core
    core.peak_words = max(core.peak_words, state.stored_words())
    if np.any(block):
        # block-local l1 fit of A(block) onto S'(block) A(block)
        V_blk = state.stage1.columns(rows) @ block
        Y = row_fits(block, V_blk, core.cfg.p, tol=core.cfg.regress_tol,
                     max_iters=core.cfg.regress_max_iters)
        _add_factored(core, rows, Y, V_blk)
    state.buffer_rows, state.buffer = [], []


def rowupdate_ingest(state: RowUpdateState, row_index: int, row) -> RowUpdateState:
    row = np.asarray(row, dtype=float).ravel()
    core = state.core
    if not 0 <= row_index < core.n:
        raise InvalidInputError(f"row index {row_index} outside [0, {core.n})")
    if row.size != core.d:
        raise ShapeError(f"row has {row.size} entries, expected {core.d}")
    if not np.all(np.isfinite(row)):
        raise InvalidInputError("row has non-finite entries")
    if row_index in state.seen:
        raise InvalidInputError(f"row {row_index} arrived twice")
    state.seen.add(row_index)
    state.buffer_rows.append(row_index)
    state.buffer.append(row)
    core.update_count += 1
    core.peak_words = max(core.peak_words, state.stored_words())
    if len(state.buffer) >= state.block_size:
        _flush(state)
    return state


def rowupdate_finalize(state: RowUpdateState):
    """Flush the partial block, then extract ``(V*, U*)`` as in the
    turnstile case. Idempotent."""
    _flush(state)
    return turnstile_finalize(state.core)


# --------------------------------------------------------------------------
# stream files


def parse_stream(source) -> list[tuple[int, int, float]]:
    """Parse ``x y c`` lines (0-based, ``#`` comments) from a path or an
    iterable of lines."""
    if isinstance(source, (str, Path)):
        source = Path(source).read_text().splitlines()
    out = []
    for lineno, line in enumerate(source, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise InvalidInputError(f"line {lineno}: expected 'x y c', got {line!r}")
        try:
            out.append((int(parts[0]), int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise InvalidInputError(f"line {lineno}: {exc}") from None
    return out


def run_turnstile(updates, n: int, d: int, k: int, seed: int = 0, want_decomposition: bool = False,
                  cfg: FitConfig | None = None):
    """Replay ``updates``; returns ``(V*, U*, state)``."""
    st = turnstile_init(n, d, k, seed, want_decomposition, cfg)
    for x, y, c in updates:
        turnstile_update(st, x, y, c)
    V, U = turnstile_finalize(st)
    return V, U, st


def run_rowupdate(updates, n: int, d: int, k: int, seed: int = 0, want_decomposition: bool = False,
                  cfg: FitConfig | None = None, block_size: int | None = None):
    """Replay ``x y c`` lines as row updates: consecutive lines sharing
    ``x`` form one row, which is ingested when ``x`` changes."""
    st = rowupdate_init(n, d, k, seed, want_decomposition, cfg, block_size)
    current, row = None, None
    for x, y, c in updates:
        if not 0 <= y < d:
            raise InvalidInputError(f"column {y} outside [0, {d})")
        if x != current:
            if current is not None:
                rowupdate_ingest(st, current, row)
            current, row = x, np.zeros(d)
        row[y] += c
    if current is not None:
        rowupdate_ingest(st, current, row)
    V, U = rowupdate_finalize(st)
    return V, U, st
