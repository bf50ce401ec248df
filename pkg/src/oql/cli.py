"""Command-line front end: certificates, completions, games, sweeps, the
brute-force dimension oracle, and the Rademacher estimator.

Exit codes: 0 success/pass, 1 domain failure (verification or pattern),
2 configuration error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .completion import PartialStarMatrix, complete_to_density
from .core import (
    DensityMatrix,
    Measurement,
    ValidationError,
    dump_json,
    generator,
    load_json,
    matrix_to_json,
    random_state,
)
from .game import RealizableAdversary, SmoothAdversary, TreeAdversary, run_game
from .learners import FixedLearner, FTLLearner, LossKind, MMWLearner
from .shattering import (
    brute_force_sfat,
    check_prefix_measurability,
    sequential_rademacher_estimate,
    verify_shattering,
)
from .trees import CONSTRUCTIONS, ShatterTree, build_construction

CSV_COLUMNS = [
    "round",
    "measurement_hash",
    "prediction",
    "label",
    "loss",
    "cum_loss",
    "cum_regret_true",
    "cum_regret_hindsight",
    "mistake_flag",
]


class ConfigError(ValueError):
    pass


def _resolve_seed(args) -> int:
    env = os.environ.get("OQL_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"OQL_SEED={env!r} is not an integer") from None
    if getattr(args, "seed", None) is None:
        raise ConfigError("a seed is required (pass --seed or set OQL_SEED)")
    return args.seed


def _replicate_seed(seed: int, replicate: int) -> int:
    return (seed << 16) ^ replicate


def _emit(payload: dict, path: str | None) -> None:
    if path:
        dump_json(payload, path)
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def _write_transcript(path: str, transcript, eps_prime: float | None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in transcript.csv_rows(eps_prime):
            writer.writerow(row)


# ------------------------------------------------------------------ verify

def cmd_verify(args) -> int:
    seed = _resolve_seed(args)
    tree, witness = build_construction(
        args.construction,
        args.n,
        args.T,
        basis_index=args.basis_index,
        scaled=args.scaled,
    )
    report = verify_shattering(
        tree, witness, delta=args.delta, budget=args.budget, seed=seed
    )
    cert = report.to_certificate(tree)
    if args.construction == "pure":
        audit = check_prefix_measurability(tree, budget=args.budget, seed=seed)
        cert["prefix_measurability"] = {
            "max_discrepancy": audit.max_discrepancy,
            "level": audit.level,
            "pairs_checked": audit.pairs_checked,
        }
    _emit(cert, args.out)
    return 0 if report.pass_at_delta else 1


# ------------------------------------------------------------------ complete

def cmd_complete(args) -> int:
    payload = load_json(args.input)
    partial = PartialStarMatrix.from_json(payload)
    try:
        state = complete_to_density(partial)
    except ValidationError as err:
        print(f"completion rejected: {err}", file=sys.stderr)
        return 1
    lam = np.linalg.eigvalsh(state.entries)
    print(f"min eigenvalue: {lam[0]:.3e}  trace: {state.entries.trace().real:.12f}")
    _emit(matrix_to_json(state), args.out)
    return 0


# ------------------------------------------------------------------ game

def _build_learner(args):
    if args.learner == "mmw":
        return MMWLearner(args.eta)
    if args.learner == "ftl":
        return FTLLearner()
    if args.learner == "fixed":
        return FixedLearner()
    raise ConfigError(f"unknown learner {args.learner!r}")


def _build_adversary(args, seed: int):
    dim = 2**args.n
    if args.adversary in ("realizable", "smooth"):
        rho = random_state(args.state, dim, seed, stream=0x5EED)
        if args.adversary == "realizable":
            return RealizableAdversary(rho, eps=args.epsilon, noise=args.noise)
        return SmoothAdversary(
            rho, sigma=args.sigma, eps=args.epsilon, noise=args.noise
        )
    if args.adversary in ("tree", "fine-shatter"):
        if args.construction is None:
            raise ConfigError("tree adversaries need --construction")
        tree, witness = build_construction(
            args.construction,
            args.n,
            args.block_depth,
            basis_index=args.basis_index,
            scaled=args.scaled,
        )
        if args.adversary == "tree":
            return TreeAdversary(tree, witness)
        return TreeAdversary(tree, witness, noise_eps=args.epsilon, noise="uniform")
    raise ConfigError(f"unknown adversary {args.adversary!r}")


def _play_replicate(args, seed: int, replicate: int):
    adversary = _build_adversary(args, seed)
    learner = _build_learner(args)
    return run_game(
        learner, adversary, args.T, args.loss, _replicate_seed(seed, replicate)
    )


def _replicate_stats(transcript, eps_prime: float) -> dict:
    stats = {
        "cumulative_loss": transcript.cumulative_loss,
        "regret_vs_hindsight": transcript.regret_vs_hindsight,
        "clipped_labels": transcript.clip_count,
    }
    if transcript.true_state is not None:
        stats["regret_vs_true"] = transcript.regret_vs_true
        stats["mistakes"] = transcript.mistakes(eps_prime)
    return stats


def _config_echo(args, seed: int) -> dict:
    skip = {"func", "out", "out_prefix", "input"}
    echo = {k: v for k, v in vars(args).items() if k not in skip and not callable(v)}
    echo["seed"] = seed
    return echo


def _run_replicates(args, seed: int):
    workers = max(1, min(args.workers, args.replicates))
    if workers == 1:
        return [_play_replicate(args, seed, r) for r in range(args.replicates)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            r: pool.submit(_play_replicate, args, seed, r)
            for r in range(args.replicates)
        }
        return [futures[r].result() for r in range(args.replicates)]


def cmd_game(args) -> int:
    seed = _resolve_seed(args)
    transcripts = _run_replicates(args, seed)
    per_rep = [_replicate_stats(t, args.epsilon_prime) for t in transcripts]
    summary = {
        "config": _config_echo(args, seed),
        "replicates": per_rep,
        "aggregate": _aggregate(per_rep),
    }
    if args.out_prefix:
        for r, t in enumerate(transcripts):
            _write_transcript(f"{args.out_prefix}_rep{r}.csv", t, args.epsilon_prime)
        dump_json(summary, f"{args.out_prefix}_summary.json")
        print(f"wrote {args.replicates} transcript(s) to {args.out_prefix}_rep*.csv")
    else:
        _emit(summary, None)
    return 0


def _aggregate(per_rep: list[dict]) -> dict:
    out = {}
    for key in per_rep[0]:
        vals = np.array([r[key] for r in per_rep], dtype=float)
        out[f"mean_{key}"] = float(vals.mean())
        out[f"std_{key}"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return out


# ------------------------------------------------------------------ sweep

def cmd_sweep(args) -> int:
    seed = _resolve_seed(args)
    values = [float(v) for v in args.values.split(",")]
    rows = []
    for value in values:
        if args.param == "sigma":
            args.sigma = value
        elif args.param == "epsilon":
            args.epsilon = value
        elif args.param == "rounds":
            args.T = int(value)
        else:
            raise ConfigError(f"unknown sweep parameter {args.param!r}")
        transcripts = _run_replicates(args, seed)
        per_rep = [_replicate_stats(t, args.epsilon_prime) for t in transcripts]
        row = {"param": args.param, "value": value, "replicates": len(per_rep)}
        row.update(_aggregate(per_rep))
        rows.append(row)
    fieldnames = list(rows[0].keys())
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        writer = csv.DictWriter(sys.stdout, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    return 0


# ------------------------------------------------------------------ sfat-brute

def _diagonal_states(dim: int, step: float) -> list[DensityMatrix]:
    if dim == 2:
        out = []
        p = 0.0
        while p <= 1.0 + 1e-12:
            out.append(DensityMatrix(np.diag([p, 1.0 - p]).astype(complex)))
            p += step
        return out
    states = [DensityMatrix.maximally_mixed(dim)]
    for i in range(dim):
        states.append(DensityMatrix.from_pure(np.eye(dim)[i]))
    return states


def cmd_sfat_brute(args) -> int:
    dim = 2**args.n
    states = _diagonal_states(dim, args.state_step)
    grid = [Measurement.basis_projector(dim, 0)]
    value = brute_force_sfat(states, grid, args.delta, args.t_max, budget=args.budget)
    _emit(
        {
            "sfat": value,
            "delta": args.delta,
            "t_max": args.t_max,
            "n": args.n,
            "hypothesis_grid_size": len(states),
            "measurement_grid_size": len(grid),
        },
        args.out,
    )
    return 0


# ------------------------------------------------------------------ rademacher

def _constant_tree(dim: int, depth: int) -> ShatterTree:
    meas = Measurement.basis_projector(dim, 0)
    return ShatterTree(
        construction="constant",
        n_qubits=int(math.log2(dim)),
        dim=dim,
        depth=depth,
        certified_depth=depth,
        delta=0.0,
        prefix_valid_v=True,
        block=depth,
        _measure_fn=lambda prefix: meas,
        _value_fn=lambda bits, level: 0.0,
        _decision_fn=lambda prefix: 0.0,
    )


def cmd_rademacher(args) -> int:
    seed = _resolve_seed(args)
    if args.construction == "constant":
        tree = _constant_tree(2**args.n, args.T)
    else:
        tree, _ = build_construction(args.construction, args.n, args.T)
    dim = tree.dim

    def sampler(rng):
        return random_state("mixed", dim, int(rng.integers(1 << 62)))

    payload = {"n": args.n, "T": args.T, "depth": tree.depth, "seed": seed}
    modes = ("sampled", "exact") if args.mode == "both" else (args.mode,)
    for mode in modes:
        est = sequential_rademacher_estimate(
            tree,
            sampler if mode == "sampled" else None,
            num_paths=args.paths,
            num_hypotheses=args.hypotheses,
            seed=seed,
            mode=mode,
        )
        payload[mode] = {"estimate": est.estimate, "std_error": est.std_error}
    _emit(payload, args.out)
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oql",
        description="online quantum-state learning laboratory",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_seed(p):
        p.add_argument("--seed", type=int, default=None, help="RNG seed (or OQL_SEED)")

    ver = sub.add_parser("verify", help="build a tree and certify its margins")
    ver.add_argument("--construction", choices=CONSTRUCTIONS, required=True)
    ver.add_argument("--n", type=int, required=True, help="qubit count")
    ver.add_argument("--T", type=int, required=True, help="construction depth parameter")
    ver.add_argument("--delta", type=float, default=None, help="margin to certify")
    ver.add_argument("--budget", type=int, default=10_000)
    ver.add_argument("--basis-index", type=int, default=0)
    ver.add_argument("--scaled", action="store_true")
    ver.add_argument("--out", default=None, help="certificate JSON path")
    add_seed(ver)
    ver.set_defaults(func=cmd_verify)

    comp = sub.add_parser("complete", help="complete a star-pattern partial matrix")
    comp.add_argument("--input", required=True, help="partial-matrix JSON path")
    comp.add_argument("--out", default=None, help="density-matrix JSON path")
    comp.set_defaults(func=cmd_complete)

    def add_game_flags(p):
        p.add_argument("--learner", choices=("mmw", "ftl", "fixed"), default="mmw")
        p.add_argument(
            "--adversary",
            choices=("realizable", "smooth", "tree", "fine-shatter"),
            default="realizable",
        )
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--T", type=int, required=True, help="number of rounds")
        p.add_argument("--loss", choices=("l1", "l2"), default="l1")
        p.add_argument("--eta", type=float, default=None)
        p.add_argument("--epsilon", type=float, default=0.0, help="label noise width")
        p.add_argument("--sigma", type=float, default=1.0, help="smoothness parameter")
        p.add_argument("--noise", choices=("none", "uniform", "gaussian"), default="uniform")
        p.add_argument("--state", choices=("pure", "mixed"), default="mixed")
        p.add_argument("--construction", choices=CONSTRUCTIONS, default=None)
        p.add_argument("--block-depth", type=int, default=2)
        p.add_argument("--basis-index", type=int, default=0)
        p.add_argument("--scaled", action="store_true")
        p.add_argument("--epsilon-prime", type=float, default=0.1, help="mistake threshold")
        p.add_argument("--replicates", type=int, default=1)
        p.add_argument("--workers", type=int, default=4)
        add_seed(p)

    game = sub.add_parser("game", help="run learner-vs-adversary games")
    add_game_flags(game)
    game.add_argument("--out-prefix", default=None, help="CSV/JSON output prefix")
    game.set_defaults(func=cmd_game)

    sweep = sub.add_parser("sweep", help="sweep one parameter over a value grid")
    add_game_flags(sweep)
    sweep.add_argument("--param", choices=("sigma", "epsilon", "rounds"), required=True)
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--out", default=None, help="aggregated CSV path")
    sweep.set_defaults(func=cmd_sweep)

    sfat = sub.add_parser("sfat-brute", help="brute-force shattering dimension")
    sfat.add_argument("--n", type=int, default=1)
    sfat.add_argument("--delta", type=float, default=0.25)
    sfat.add_argument("--t-max", type=int, default=3)
    sfat.add_argument("--state-step", type=float, default=1.0 / 16)
    sfat.add_argument("--budget", type=int, default=2_000_000)
    sfat.add_argument("--out", default=None)
    sfat.set_defaults(func=cmd_sfat_brute)

    rad = sub.add_parser("rademacher", help="sequential Rademacher estimate")
    rad.add_argument("--n", type=int, default=1)
    rad.add_argument("--T", type=int, default=64, help="tree depth")
    rad.add_argument("--paths", type=int, default=2000)
    rad.add_argument("--hypotheses", type=int, default=256)
    rad.add_argument("--mode", choices=("sampled", "exact", "both"), default="both")
    rad.add_argument(
        "--construction",
        choices=("constant",) + CONSTRUCTIONS,
        default="constant",
    )
    rad.add_argument("--out", default=None)
    add_seed(rad)
    rad.set_defaults(func=cmd_rademacher)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ValidationError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
