"""In-process coordinator/machine simulation of the arbitrary-partition and
row-partition protocols, with exact word accounting.

Machines see only their own part and the messages addressed to them; the
coordinator sees only messages. Delivery is in machine-id order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, ShapeError
from .linalg import entrywise_norm, rank_constrained_solve, split_rank_k
from .lowrank import FitConfig, Factorization, rowupdate_sketches, turnstile_sketches
from .regression import row_fits
from .sketching import rng_for, sketch_left, sketch_right

COORDINATOR = "coordinator"
SEED_BITS = 64
MODES = ("arbitrary", "row")


def machine_name(i: int) -> str:
    return f"machine-{i}"


@dataclass(frozen=True)
class Message:
    sender: str
    receiver: str
    tag: str
    words: int


@dataclass
class CommLog:
    messages: list = field(default_factory=list)

    def send(self, sender: str, receiver: str, tag: str, payload):
        """Record a message and hand back its payload; arrays count one
        word per entry, seeds ``ceil(SEED_BITS / 64)`` words."""
        if tag == "seed":
            words = math.ceil(SEED_BITS / 64)
        else:
            words = int(sum(np.asarray(p).size for p in payload)) if isinstance(payload, tuple) \
                else int(np.asarray(payload).size)
        self.messages.append(Message(sender, receiver, tag, words))
        return payload

    @property
    def total_words(self) -> int:
        return sum(m.words for m in self.messages)

    def totals(self) -> dict:
        up = sum(m.words for m in self.messages if m.receiver == COORDINATOR)
        return {"to_coordinator": up, "from_coordinator": self.total_words - up}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sender", "receiver", "tag", "words"])
        for m in self.messages:
            w.writerow([m.sender, m.receiver, m.tag, m.words])
        return buf.getvalue()


@dataclass
class Partition:
    mode: str
    parts: list

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError(f"unknown partition mode {self.mode!r}")
        self.parts = [np.asarray(p, dtype=float) for p in self.parts]
        if not self.parts:
            raise InvalidInputError("need at least one part")
        if any(p.ndim != 2 for p in self.parts):
            raise ShapeError("every part must be 2-d")
        d = self.parts[0].shape[1]
        if any(p.shape[1] != d for p in self.parts):
            raise ShapeError("parts disagree on the number of columns")
        if self.mode == "arbitrary" and len({p.shape for p in self.parts}) != 1:
            raise ShapeError("arbitrary-partition parts must share one shape")
        if self.mode == "row" and any(p.shape[0] < 1 for p in self.parts):
            raise ShapeError("every row block needs at least one row")

    @property
    def s(self) -> int:
        return len(self.parts)

    @property
    def shape(self) -> tuple[int, int]:
        if self.mode == "arbitrary":
            return self.parts[0].shape
        return sum(p.shape[0] for p in self.parts), self.parts[0].shape[1]

    def assemble(self) -> np.ndarray:
        """The global matrix; used only for evaluating the result."""
        if self.mode == "arbitrary":
            return np.sum(self.parts, axis=0)
        return np.vstack(self.parts)


def split_arbitrary(A, s: int, seed: int = 0) -> Partition:
    """Random ``A = sum_i A_i``: each entry goes whole to one machine or is
    split with random Gaussian shares."""
    A = np.asarray(A, dtype=float)
    rng = rng_for(seed)
    owner = rng.integers(0, s, size=A.shape)
    parts = [np.where(owner == i, A, 0.0) for i in range(s)]
    if s > 1:
        shares = rng.standard_normal((s - 1,) + A.shape)
        for i in range(s - 1):
            parts[i] = parts[i] + shares[i]
        parts[-1] = parts[-1] - shares.sum(axis=0)
    return Partition("arbitrary", parts)


def split_rows(A, s: int) -> Partition:
    A = np.asarray(A, dtype=float)
    if not 1 <= s <= A.shape[0]:
        raise InvalidInputError(f"cannot split {A.shape[0]} rows over {s} machines")
    return Partition("row", np.array_split(A, s, axis=0))


def comm_budget(s: int, k: int, d: int, n: int, want_decomposition: bool, c: float = 64.0) -> float:
    """``s (c k^2 log^3 k + k d ceil(log2 k + 1) + [dec] k n)``."""
    lg = max(math.log2(k), 1.0)
    return s * (c * k * k * lg**3 + k * d * math.ceil(math.log2(k) + 1) + (k * n if want_decomposition else 0))


def _coordinator_solve(log: CommLog, triples, k: int, s: int):
    L = triples[0][0].copy()
    N = triples[0][1].copy()
    M = triples[0][2].copy()
    for Li, Ni, Mi in triples[1:]:
        L += Li
        N += Ni
        M += Mi
    k_eff = min(k, L.shape[1], N.shape[0])
    if not (np.any(L) and np.any(N) and np.any(M)):
        left, right = np.zeros((L.shape[1], k)), np.zeros((k, N.shape[0]))
    else:
        left, right = split_rank_k(rank_constrained_solve(M, L, N, k_eff), k)
    # X = left @ right is broadcast in factored form
    return [log.send(COORDINATOR, machine_name(i), "X", (left, right)) for i in range(s)]


def _result(parts: Partition, U, V, k, cfg, tag, log, want_decomposition):
    if not want_decomposition:
        return V
    A = parts.assemble()
    cost = entrywise_norm(U @ V - A, cfg.p)
    return Factorization(U, V, k, cost, cfg.seed, tag, cfg.p, {"comm_words": log.total_words})


def run_arbitrary_partition(parts: Partition, k: int, seed: int = 0, want_decomposition: bool = False,
                            cfg: FitConfig | None = None):
    """Returns ``(V*, log)``, or ``(Factorization, log)`` with the
    decomposition option."""
    if parts.mode != "arbitrary":
        raise InvalidInputError("run_arbitrary_partition needs an arbitrary partition")
    cfg = FitConfig(seed=seed) if cfg is None else cfg
    n, d = parts.shape
    log = CommLog()
    s = parts.s
    seeds = [log.send(COORDINATOR, machine_name(i), "seed", cfg.seed) for i in range(s)]

    # machines: sketch summaries from the shared seed
    locals_, triples = [], []
    for i, Ai in enumerate(parts.parts):
        sk = turnstile_sketches(n, d, k, FitConfig(**{**cfg.__dict__, "seed": seeds[i]}))
        SA = sketch_left(sk.S, Ai)
        AR = sketch_right(Ai, sk.R)
        T1A = sketch_left(sk.T1, Ai)
        triple = (sketch_left(sk.T1, AR), sketch_right(SA, sk.T2), sketch_right(T1A, sk.T2))
        triples.append(tuple(log.send(machine_name(i), COORDINATOR, tag, m)
                             for tag, m in zip(("L", "N", "M"), triple)))
        locals_.append((SA, AR))

    xs = _coordinator_solve(log, triples, k, s)

    V = np.zeros((k, d))
    U = np.zeros((n, k)) if want_decomposition else None
    for i, ((SA, AR), (left, right)) in enumerate(zip(locals_, xs)):
        V += log.send(machine_name(i), COORDINATOR, "V", right @ SA)
        if want_decomposition:
            U += log.send(machine_name(i), COORDINATOR, "U", AR @ left)
    return _result(parts, U, V, k, cfg, "dist-arbitrary", log, want_decomposition), log


def run_row_partition(parts: Partition, k: int, seed: int = 0, want_decomposition: bool = False,
                      cfg: FitConfig | None = None):
    """Each machine replaces its rows by their l1 projection onto its local
    sketch ``S'_i A_i`` and ships sketches of the result."""
    if parts.mode != "row":
        raise InvalidInputError("run_row_partition needs a row partition")
    cfg = FitConfig(seed=seed) if cfg is None else cfg
    n, d = parts.shape
    log = CommLog()
    s = parts.s
    seeds = [log.send(COORDINATOR, machine_name(i), "seed", cfg.seed) for i in range(s)]

    offsets = np.cumsum([0] + [p.shape[0] for p in parts.parts])
    locals_, triples = [], []
    for i, Ai in enumerate(parts.parts):
        bundle = rowupdate_sketches(n, d, k, FitConfig(**{**cfg.__dict__, "seed": seeds[i]}))
        sk = bundle.core
        rows = np.arange(offsets[i], offsets[i + 1])
        V_i = bundle.stage1.columns(rows) @ Ai
        Y_i = row_fits(Ai, V_i, cfg.p, tol=cfg.regress_tol, max_iters=cfg.regress_max_iters)
        # B_i = Y_i V_i, kept factored
        BR = Y_i @ (V_i @ np.asarray(sk.R).T)
        SB = (sk.S.columns(rows) @ Y_i) @ V_i
        T1 = sk.T1.columns(rows)
        triple = (T1 @ BR, SB @ np.asarray(sk.T2).T, (T1 @ Y_i) @ (V_i @ np.asarray(sk.T2).T))
        triples.append(tuple(log.send(machine_name(i), COORDINATOR, tag, m)
                             for tag, m in zip(("L", "N", "M"), triple)))
        locals_.append((SB, BR))

    xs = _coordinator_solve(log, triples, k, s)

    V = np.zeros((k, d))
    U_blocks = []
    for i, ((SB, BR), (left, right)) in enumerate(zip(locals_, xs)):
        V += log.send(machine_name(i), COORDINATOR, "V", right @ SB)
        if want_decomposition:
            U_blocks.append(log.send(machine_name(i), COORDINATOR, "U", BR @ left))
    U = np.vstack(U_blocks) if want_decomposition else None
    return _result(parts, U, V, k, cfg, "dist-row", log, want_decomposition), log
