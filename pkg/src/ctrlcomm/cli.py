"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 infeasible, 4 decode or tree failure.
Choice pairs on the command line are 1-based; JSON output reports them the
same way.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bh_system import DEFAULT_STEPS
from .controls import BilinearMap
from .errors import (
    DecodeError,
    InfeasibleError,
    InvalidInputError,
    PreconditionError,
    TreeConstructionError,
    UnsupportedRepresentationError,
)
from .io import SCHEMA_VERSION, read_matrix, read_solution, write_solution
from .partition import (
    build_protocol_tree,
    is_monochromatic,
    min_monochromatic_partition,
    partition_cost_A,
    protocol_complexity,
    refine_for_protocol,
    validate_partition,
)
from .protocol_sim import RoundConfig, run_all_pairs, run_single_round, run_two_phase, transcript_jsonl
from .synthesis import cost_report, default_dimension, synthesize_single_round

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_DECODE = 4


def _pi(x: Optional[float]) -> str:
    if x is None:
        return "n/a"
    return f"{x:.10g} ({x / math.pi:.6f} pi)"


def _load_map(source: str) -> Optional[BilinearMap]:
    if source == "bh":
        return None
    return BilinearMap(read_matrix(source))


def _emit(obj: dict) -> None:
    print(json.dumps(obj, indent=2))


def cmd_cost(args) -> int:
    h = read_matrix(args.matrix)
    f = _load_map(args.map)
    rep = cost_report(h, f, args.p, args.q)
    if args.json:
        _emit(
            {
                "schema": SCHEMA_VERSION,
                "single_round_cost": rep.single_round_cost,
                "shared_info_cost": rep.shared_info_cost,
                "gap": rep.gap,
                "gap_bound": rep.gap_bound,
            }
        )
        return EXIT_OK
    print(f"single-round cost C_hat : {_pi(rep.single_round_cost)}")
    print(f"shared-info cost J      : {_pi(rep.shared_info_cost)}")
    print(f"gap C_hat - J           : {_pi(rep.gap)}")
    print(f"gap lower bound         : {_pi(rep.gap_bound)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    h = read_matrix(args.matrix)
    f = _load_map(args.map)
    sol = synthesize_single_round(h, f, args.p, args.q, tol=args.tol)
    write_solution(sol, args.out)
    dim = f.dim if f is not None else default_dimension(h.shape)
    print(
        f"wrote {args.out}: {sol.alice.shape[0]}+{sol.bob.shape[0]} signals, {dim} coefficients each, "
        f"cost {_pi(sol.cost)}, residual {sol.residual:.3e}"
    )
    return EXIT_OK


def _pair(raw: Sequence[int], shape: tuple[int, int]) -> tuple[int, int]:
    i, j = raw
    m, n = shape
    if not (1 <= i <= m and 1 <= j <= n):
        raise InvalidInputError(f"pair ({i}, {j}) out of range: need 1 <= i <= {m}, 1 <= j <= {n}")
    return i - 1, j - 1


def _outcome_json(out) -> dict:
    d = out.to_dict()
    d["choice"] = [out.choice[0] + 1, out.choice[1] + 1]
    return d


def cmd_simulate(args) -> int:
    sol = read_solution(args.solution)
    i, j = _pair(args.pair, sol.shape)
    out = run_single_round(sol, i, j, RoundConfig(steps_per_round=args.steps, tolerance=args.tol))
    if args.traj:
        Path(args.traj).write_text(out.trajectory.to_csv())
    _emit(_outcome_json(out))
    return EXIT_OK


def _partition_for(h, args):
    """Partition plus protocol tree; refines the partition unless --strict."""
    p = min_monochromatic_partition(h, budget=args.budget, mode="greedy" if args.greedy else "exact")
    if not (validate_partition(h, p) and all(is_monochromatic(h, b) for b in p.blocks)):
        raise TreeConstructionError("partition search returned an invalid partition")
    try:
        return p, p, build_protocol_tree(p, h)
    except TreeConstructionError:
        if args.strict:
            raise
    refined = refine_for_protocol(p, h)
    return p, refined, build_protocol_tree(refined, h)


def cmd_partition(args) -> int:
    h = read_matrix(args.matrix)
    found, p, tree = _partition_for(h, args)
    if args.tree:
        Path(args.tree).write_text(tree.to_dot(p, h))
    cost = partition_cost_A(h, p)
    _emit(
        {
            "schema": SCHEMA_VERSION,
            "index_base": 0,
            "num_blocks": len(p),
            "exact": p.exact,
            "refined_from": None if p is found else len(found),
            "blocks": [dict(b.to_dict(), value=float(b.submatrix(h)[0, 0])) for b in p.blocks],
            "tree": tree.to_dict(),
            "depth": tree.depth(),
            "complexity": protocol_complexity(tree),
            "average_cost": cost.average,
            "average_cost_over_pi": cost.average / math.pi,
        }
    )
    return EXIT_OK


def cmd_twophase(args) -> int:
    if not (args.epsilon > 0 and math.isfinite(args.epsilon)):
        raise InvalidInputError(f"epsilon must be positive, got {args.epsilon}")
    h = read_matrix(args.matrix)
    cfg = RoundConfig(
        steps_per_round=args.steps, observation=args.observation, levels=args.levels, z_range=args.z_range
    )
    _, p, tree = _partition_for(h, args)
    if args.all_pairs or args.pair is None:
        runs = run_all_pairs(tree, p, h, args.epsilon, cfg)
    else:
        i, j = _pair(args.pair, h.shape)
        runs = [run_two_phase(tree, p, h, i, j, args.epsilon, cfg)]
    if args.transcript:
        with open(args.transcript, "w") as fh:
            for r in runs:
                fh.write(transcript_jsonl(r))
    rep = cost_report(h)
    mean = float(np.mean([r.control_energy for r in runs]))
    _emit(
        {
            "schema": SCHEMA_VERSION,
            "epsilon": args.epsilon,
            "pairs": len(runs),
            "mean_energy": mean,
            "mean_energy_over_pi": mean / math.pi,
            "shared_info_cost": rep.shared_info_cost,
            "single_round_cost": rep.single_round_cost,
            "relative_excess": (mean - rep.shared_info_cost) / rep.shared_info_cost if rep.shared_info_cost else None,
            "max_bits": max(r.bits_exchanged for r in runs),
            "complexity": protocol_complexity(tree),
            "all_realized": all(r.realized for r in runs),
            "runs": [_outcome_json(r) for r in runs],
        }
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ctrlcomm", description="Control-based communication protocols on the B-H plant.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def weights(sp):
        sp.add_argument("--map", default="bh", help="'bh' (default) or a matrix file holding F")
        sp.add_argument("--p", type=float, default=None, help="weight on Alice's energy (default m)")
        sp.add_argument("--q", type=float, default=None, help="weight on Bob's energy (default n)")

    sp = sub.add_parser("cost", help="optimal single-round and shared-information costs")
    sp.add_argument("matrix")
    weights(sp)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_cost)

    sp = sub.add_parser("synth", help="synthesize a minimum-energy single-round protocol")
    sp.add_argument("matrix")
    sp.add_argument("--out", default="sol.json")
    sp.add_argument("--tol", type=float, default=1e-9)
    weights(sp)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("simulate", help="run one choice pair of a solution through the plant")
    sp.add_argument("solution")
    sp.add_argument("--pair", type=int, nargs=2, required=True, metavar=("I", "J"))
    sp.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.add_argument("--traj", help="write the trajectory as CSV")
    sp.set_defaults(func=cmd_simulate)

    def part_opts(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--exact", action="store_true", help="branch-and-bound (default)")
        g.add_argument("--greedy", action="store_true", help="largest rectangle first")
        sp.add_argument("--budget", type=int, default=50_000, help="search node budget")
        sp.add_argument(
            "--strict", action="store_true", help="fail (exit 4) instead of refining a partition no bit protocol resolves"
        )

    sp = sub.add_parser("partition", help="minimum monochromatic partition and protocol tree")
    sp.add_argument("matrix")
    part_opts(sp)
    sp.add_argument("--tree", help="write the protocol tree in DOT format")
    sp.set_defaults(func=cmd_partition)

    sp = sub.add_parser("twophase", help="simulate the signal-then-act protocol")
    sp.add_argument("matrix")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--all-pairs", action="store_true")
    sp.add_argument("--pair", type=int, nargs=2, metavar=("I", "J"))
    sp.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    sp.add_argument("--observation", choices=["z-sign", "z-quantized", "full-state"], default="z-sign")
    sp.add_argument("--levels", type=int, default=2)
    sp.add_argument("--z-range", type=float, default=1.0)
    sp.add_argument("--transcript", help="write per-round records as JSON lines")
    part_opts(sp)
    sp.set_defaults(func=cmd_twophase)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInputError, PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InfeasibleError, UnsupportedRepresentationError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DecodeError, TreeConstructionError) as exc:
        print(f"protocol failure: {exc}", file=sys.stderr)
        return EXIT_DECODE


if __name__ == "__main__":
    sys.exit(main())
