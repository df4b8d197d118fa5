"""Command-line front door: ``fit``, ``cur``, ``stream``, ``dist``, ``gen``
and ``bench``.

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .bench import run_benchmark
from .distributed import run_arbitrary_partition, run_row_partition, split_arbitrary, split_rows
from .emd import fit_emd
from .errors import BoundaryDraw, InvalidInputError, ShapeError
from .instances import KINDS, InstanceSpec, gen_instance
from .linalg import entrywise_norm
from .lowrank import (
    FitConfig,
    PRESETS,
    bicriteria_fit,
    cur_decompose,
    fit_input_sparsity,
    fit_lp,
    fit_polyklogd,
    fit_subset_enum,
)
from .matrix_io import matrix_to_csv, read_matrix, write_matrix
from .regression import multi_response_regress
from .streaming import parse_stream, run_rowupdate, run_turnstile

FIT_ALGOS = ("bicriteria", "input-sparsity", "polyklogd", "subset-enum", "lp", "emd")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common(p, k=True):
    if k:
        p.add_argument("--k", type=int, required=True, help="target rank")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--preset", choices=PRESETS, default="practical")
    p.add_argument("--p", type=float, default=1.0, help="entrywise norm exponent in [1, 2)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="l1lowrank", description="entrywise l1 low-rank approximation by sketching")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="rank-k fit of a matrix file")
    p.add_argument("input")
    p.add_argument("--algo", choices=FIT_ALGOS, default="polyklogd")
    p.add_argument("--r", type=int, default=None, help="subset size for subset-enum (default k)")
    p.add_argument("--out", help="write factors to OUT.U.csv and OUT.V.csv")
    _common(p)

    p = sub.add_parser("cur", help="CUR decomposition of a matrix file")
    p.add_argument("input")
    p.add_argument("--out", help="write OUT.C.csv, OUT.U.csv, OUT.R.csv")
    _common(p)

    p = sub.add_parser("stream", help="replay an 'x y c' update stream")
    p.add_argument("input")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--mode", choices=("turnstile", "rowupdate"), default="turnstile")
    p.add_argument("--decomposition", action="store_true", help="also return U")
    p.add_argument("--out", help="write factors to OUT.V.csv (and OUT.U.csv)")
    _common(p)

    p = sub.add_parser("dist", help="simulate a partitioned protocol on a matrix file")
    p.add_argument("input")
    p.add_argument("--machines", type=int, default=2)
    p.add_argument("--mode", choices=("arbitrary", "row"), default="arbitrary")
    p.add_argument("--decomposition", action="store_true")
    p.add_argument("--out", help="write the communication log CSV here")
    _common(p)

    p = sub.add_parser("gen", help="generate an instance matrix")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--d", type=int, default=0)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="matrix file (default: CSV on stdout)")

    p = sub.add_parser("bench", help="run a JSON benchmark config")
    p.add_argument("config")
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _config(args) -> FitConfig:
    return FitConfig(seed=args.seed, preset=args.preset, p=args.p)


def _emit(result: dict):
    print(json.dumps(result, sort_keys=True))


def _dense(A):
    return A.toarray() if hasattr(A, "toarray") else A


def cmd_fit(args) -> dict:
    A = read_matrix(args.input)
    cfg = _config(args)
    start = time.perf_counter()
    if args.algo == "bicriteria":
        fit = bicriteria_fit(A, args.k, cfg=cfg)
    elif args.algo == "input-sparsity":
        fit = fit_input_sparsity(A, args.k, cfg)
    elif args.algo == "polyklogd":
        fit = fit_polyklogd(A, args.k, cfg)
    elif args.algo == "subset-enum":
        fit = fit_subset_enum(A, args.k, args.r or args.k, cfg)
    elif args.algo == "lp":
        fit = fit_lp(A, args.k, args.p, cfg)
    else:
        A = _dense(A)
        delta = int(round(np.sqrt(A.shape[0])))
        if delta * delta != A.shape[0]:
            raise ShapeError("emd input rows must form a square grid")
        fit = fit_emd([c.reshape(delta, delta) for c in A.T], args.k, cfg)
    result = {"algorithm": fit.algo_tag, "k": fit.k, "p": fit.p, "seed": args.seed,
              "cost_l1": fit.cost_l1, "elapsed_ms": (time.perf_counter() - start) * 1e3}
    if "exact_cost" in fit.info:
        result["exact_cost"] = fit.info["exact_cost"]
    if args.out:
        write_matrix(f"{args.out}.U.csv", fit.U)
        write_matrix(f"{args.out}.V.csv", fit.V)
        result["factors_path"] = args.out
    return result


def cmd_cur(args) -> dict:
    A = _dense(read_matrix(args.input))
    start = time.perf_counter()
    cur = cur_decompose(A, args.k, _config(args))
    result = {"algorithm": "cur", "k": args.k, "p": args.p, "seed": args.seed, "cost_l1": cur.cost_l1,
              "columns": cur.col_index.tolist(), "rows": cur.row_index.tolist(),
              "elapsed_ms": (time.perf_counter() - start) * 1e3}
    if args.out:
        for name, M in (("C", cur.C), ("U", cur.U), ("R", cur.R)):
            write_matrix(f"{args.out}.{name}.csv", M)
        result["factors_path"] = args.out
    return result


def cmd_stream(args) -> dict:
    updates = parse_stream(args.input)
    start = time.perf_counter()
    run = run_turnstile if args.mode == "turnstile" else run_rowupdate
    V, U, state = run(updates, args.n, args.d, args.k, args.seed, args.decomposition, _config(args))
    A = np.zeros((args.n, args.d))
    for x, y, c in updates:
        A[x, y] += c
    # best left factor for V* measures how well the row space was captured
    U_fit = U if U is not None else multi_response_regress(V.T, A.T, "l1", args.p).T
    result = {"algorithm": args.mode, "k": args.k, "p": args.p, "seed": args.seed,
              "updates": len(updates), "peak_words": int(state.peak_words if args.mode == "turnstile"
                                                        else state.core.peak_words),
              "cost_l1": entrywise_norm(U_fit @ V - A, args.p),
              "elapsed_ms": (time.perf_counter() - start) * 1e3}
    if args.out:
        write_matrix(f"{args.out}.V.csv", V)
        if U is not None:
            write_matrix(f"{args.out}.U.csv", U)
        result["factors_path"] = args.out
    return result


def cmd_dist(args) -> dict:
    A = _dense(read_matrix(args.input))
    start = time.perf_counter()
    cfg = _config(args)
    if args.mode == "arbitrary":
        out, log = run_arbitrary_partition(split_arbitrary(A, args.machines, args.seed), args.k,
                                           args.seed, args.decomposition, cfg)
    else:
        out, log = run_row_partition(split_rows(A, args.machines), args.k, args.seed,
                                     args.decomposition, cfg)
    result = {"algorithm": f"dist-{args.mode}", "k": args.k, "p": args.p, "seed": args.seed,
              "machines": args.machines, "comm_words": log.total_words, **log.totals(),
              "elapsed_ms": (time.perf_counter() - start) * 1e3}
    if args.decomposition:
        result["cost_l1"] = out.cost_l1
    if args.out:
        Path(args.out).write_text(log.to_csv())
    return result


def cmd_gen(args):
    spec = InstanceSpec(args.kind, n=args.n, d=args.d, k=args.k, gamma=args.gamma, eps=args.eps,
                        seed=args.seed)
    A = gen_instance(spec)
    if args.out:
        write_matrix(args.out, A)
    else:
        sys.stdout.write(matrix_to_csv(A))


def cmd_bench(args):
    csv_text = run_benchmark(args.config).to_csv()
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)


COMMANDS = {"fit": cmd_fit, "cur": cmd_cur, "stream": cmd_stream, "dist": cmd_dist,
            "gen": cmd_gen, "bench": cmd_bench}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 2
    try:
        result = COMMANDS[args.command](args)
    except (InvalidInputError, ShapeError, BoundaryDraw, OSError, ValueError, KeyError) as exc:
        print(f"l1lowrank {args.command}: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, dict):
        _emit(result)
    return 0


def main():
    sys.exit(cli_main())
