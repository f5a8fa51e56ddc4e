"""Command-line driver.

Subcommands: simulate, analyze, table, freeresp, limits, heatmap, eigcheck.
Every subcommand accepts ``--seed``, ``--config`` (plain ``key=value``
lines; command-line flags win), ``--out`` and ``--format {csv,json}``.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import free_response as fr
from . import gridworld as gw
from . import io, limits, markov, sfa
from .errors import DefinitenessError, ErgodicityError, SingularityError, SrSfaError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

TABLE_INDICES = tuple(range(0, 6)) + tuple(range(72, 78)) + tuple(range(144, 150))


class UsageError(Exception):
    """Invalid combination or value of command-line parameters."""


# ---------------------------------------------------------------------------
# parsing


def _int_list(text: str) -> list[int]:
    return [int(t) for t in str(text).replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [float(t) for t in str(text).replace(",", " ").split()]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (u64)")
    p.add_argument("--config", help="key=value parameter file; flags override it")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _world_flags(p: argparse.ArgumentParser, steps: int = 10**6) -> None:
    # shape defaults to the trajectory sidecar, else 15 x 10
    p.add_argument("--lx", type=int, default=None)
    p.add_argument("--ly", type=int, default=None)
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--self-transition", type=float, default=0.2)
    p.add_argument("--trajectory", help="existing .sftr file instead of simulating")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="srsfa", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="roll out the gridworld random walk")
    _common(p)
    p.add_argument("--lx", type=int, default=15)
    p.add_argument("--ly", type=int, default=10)
    p.add_argument("--steps", type=int, default=10**6)
    p.add_argument("--self-transition", type=float, default=0.2)
    p.add_argument("--start", type=int, default=None, help="fixed start state (default: sample pi)")
    p.add_argument("--name", default="trajectory")
    p.add_argument("--export-csv", action="store_true", help="also write the states as CSV")

    p = sub.add_parser("analyze", help="solve one SFA problem on a trajectory")
    _common(p)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--variant", choices=("sfa", "tau", "lf"), default="tau")
    p.add_argument("--type", dest="type_", type=int, choices=(1, 2), default=2)
    p.add_argument("--formulation", choices=("unnormalized", "symmetric", "left"), default="left")
    p.add_argument("--tau", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--tau-max", type=int, default=None)
    p.add_argument("--sigma2", type=float, default=None, help="noise variance")
    p.add_argument("--pinv", action="store_true", help="restrict singular problems to the covariance range")
    p.add_argument("--outputs", type=int, default=None)
    p.add_argument("--report-taus", type=_int_list, default=[1, 2, 3])
    p.add_argument("--report-gammas", type=_float_list, default=[0.8, 0.9])
    p.add_argument("--report-tau-max", type=int, default=100)
    p.add_argument("--heatmaps", type=_int_list, default=[], help="output indices to render")
    p.add_argument("--lx", type=int, default=None)
    p.add_argument("--ly", type=int, default=None)

    p = sub.add_parser("table", help="lagged correlations and LF objectives of selected CSFA outputs")
    _common(p)
    _world_flags(p)
    p.add_argument("--indices", type=_int_list, default=list(TABLE_INDICES))
    p.add_argument("--tau-max", type=int, default=100)

    p = sub.add_parser("freeresp", help="discrete free responses and their Delta and C_1")
    _common(p)
    p.add_argument("--T", type=int, default=45)
    p.add_argument("--j", type=_int_list, default=[0, 1, 2, 3, 22, 41, 42, 43, 44])

    p = sub.add_parser("limits", help="compare statistics with their large-sample limits")
    _common(p)
    _world_flags(p)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--tau-max", type=int, default=100)
    p.add_argument("--taus", type=_int_list, default=[1])
    p.add_argument("--types", type=_int_list, default=[1, 2])
    p.add_argument("--tolerance", type=float, default=None, help="default: 5/sqrt(T pi_min)")
    p.add_argument("--normalized", action="store_true", help="also check normalized cells (small worlds)")
    p.add_argument("--sigma2", type=float, default=1e-4)

    p = sub.add_parser("heatmap", help="render a state vector as a grid image")
    _common(p)
    _world_flags(p)
    p.add_argument("--source", choices=("stc", "lf", "output", "weights"), default="stc")
    p.add_argument("--index", type=int, required=True, help="state (stc/lf) or output index")
    p.add_argument("--tau", type=int, default=1)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--tau-max", type=int, default=100)
    p.add_argument("--weights", help="weights CSV written by analyze (source=weights)")
    p.add_argument("--svg", action="store_true")
    p.add_argument("--name", default=None)

    p = sub.add_parser("eigcheck", help="SR eigen relations and IR property checks")
    _common(p)
    p.add_argument("--chain", choices=("gridworld", "cycle3", "single", "random", "random-reversible"),
                   default="gridworld")
    p.add_argument("--lx", type=int, default=15)
    p.add_argument("--ly", type=int, default=10)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--tol", type=float, default=1e-8)
    return parser


def read_config(path: str) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str], args: argparse.Namespace):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in read_config(args.config).items():
        if key in ("config", "command") or key not in actions:
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = actions[key]
        if action.nargs == 0:
            defaults[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# helpers


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


def _world(lx: int, ly: int, eps: float) -> gw.Gridworld:
    _require(lx >= 1 and ly >= 1, "--lx and --ly must be positive")
    _require(0.0 <= eps <= 1.0, "--self-transition must lie in [0, 1]")
    return gw.Gridworld(lx, ly, eps)


def _sidecar(path: Path) -> dict:
    side = path.with_suffix(".json")
    if side.exists():
        return json.loads(side.read_text())
    return {}


def _trajectory_and_world(args):
    """Load ``--trajectory`` (world shape from its sidecar) or simulate one."""
    eps = getattr(args, "self_transition", 0.2)
    if getattr(args, "trajectory", None):
        path = Path(args.trajectory)
        _require(path.exists(), f"trajectory file {path} not found")
        traj = gw.read_trajectory(path)
        side = _sidecar(path)
        lx = args.lx if args.lx is not None else side.get("lx")
        ly = args.ly if args.ly is not None else side.get("ly")
        eps = side.get("self_transition", eps)
        if lx is None or ly is None:
            lx, ly = traj.n_states, 1
        world = _world(int(lx), int(ly), float(eps))
        _require(world.n_states == traj.n_states, "grid shape does not match the trajectory")
        return traj, world
    world = _world(15 if args.lx is None else args.lx, 10 if args.ly is None else args.ly, eps)
    _require(args.steps >= 2, "--steps must be at least 2")
    P = gw.build_transition(world)
    return gw.rollout(P, args.steps, args.seed, pi=markov.stationary_distribution(P)), world


def _table_rows(stat_values: dict, indices: Sequence[int]):
    return [[name] + [float(v[j]) for j in indices] for name, v in stat_values.items()]


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    world = _world(args.lx, args.ly, args.self_transition)
    _require(args.steps >= 2, "--steps must be at least 2")
    _require(args.start is None or 0 <= args.start < world.n_states, "--start outside the grid")
    P = gw.build_transition(world)
    pi = markov.stationary_distribution(P)
    traj = gw.rollout(P, args.steps, args.seed, start=args.start, pi=pi)
    out = _out_dir(args)
    gw.write_trajectory(out / f"{args.name}.sftr", traj)
    io.write_json(
        out / f"{args.name}.json",
        {"lx": world.lx, "ly": world.ly, "T": len(traj), "seed": args.seed,
         "self_transition": world.self_transition, "pi": pi},
    )
    if args.export_csv:
        gw.write_trajectory_csv(out / f"{args.name}.csv", traj)
    print(f"wrote {len(traj)} steps over {world.n_states} states to {out / (args.name + '.sftr')}")
    return EXIT_OK


def _analyze_spec(args) -> sfa.SfaProblemSpec:
    if args.variant != "tau":
        _require(args.tau is None, "--tau only applies to --variant tau")
    if args.variant != "lf":
        _require(args.gamma is None and args.tau_max is None, "--gamma/--tau-max only apply to --variant lf")
    kw = {}
    if args.variant == "tau":
        kw["tau"] = 1 if args.tau is None else args.tau
        _require(kw["tau"] >= 1, "--tau must be at least 1")
    if args.variant == "lf":
        kw["gamma"] = 0.9 if args.gamma is None else args.gamma
        kw["tau_max"] = 100 if args.tau_max is None else args.tau_max
        _require(0.0 < kw["gamma"] < 1.0, "--gamma must lie in (0, 1)")
        _require(kw["tau_max"] >= 1, "--tau-max must be at least 1")
    _require(args.sigma2 is None or args.sigma2 >= 0, "--sigma2 must be non-negative")
    _require(args.outputs is None or args.outputs >= 1, "--outputs must be positive")
    return sfa.SfaProblemSpec(
        args.variant, args.type_, args.formulation, noise_variance=args.sigma2, noise_seed=args.seed,
        n_outputs=args.outputs, use_pseudoinverse=args.pinv, **kw,
    )


def cmd_analyze(args) -> int:
    spec = _analyze_spec(args)
    traj, world = _trajectory_and_world(args)
    _require(all(t >= 0 for t in args.report_taus), "--report-taus must be non-negative")
    _require(all(0 < g < 1 for g in args.report_gammas), "--report-gammas must lie in (0, 1)")
    T = len(traj)
    report_tau_max = min(args.report_tau_max, T - 1)
    max_lag = max([report_tau_max] + list(args.report_taus))
    _require(max_lag < T, "requested lags exceed the trajectory length")
    sol = sfa.solve(traj, spec, max_lag=max_lag)
    stats = sol.per_output_stats(args.report_taus, args.report_gammas, report_tau_max)
    out = _out_dir(args)
    J = sol.n_outputs
    header = ["j", "eigenvalue"] + list(stats)
    rows = [[j, float(sol.eigenvalues[j])] + [float(v[j]) for v in stats.values()] for j in range(J)]
    if args.format == "json":
        io.write_json(out / "solution.json", {
            "spec": spec.__dict__, "noise_variance": sol.noise_variance,
            "eigenvalues": sol.eigenvalues, "weights": sol.weights,
            "stats": {k: v for k, v in stats.items()},
        })
    else:
        io.write_table_csv(out / "eigenvalues.csv", ["j", "eigenvalue"], [[j, float(e)] for j, e in enumerate(sol.eigenvalues)])
        io.write_matrix_csv(out / "weights.csv", sol.weights)
        io.write_table_csv(out / "output_stats.csv", header, rows)
    for j in args.heatmaps:
        _require(0 <= j < J, f"heatmap index {j} outside 0..{J - 1}")
        io.write_heatmap(out / f"heatmap_output_{j}", world.to_grid(sol.weights[:, j]))
    print(f"solved {spec.variant} type {spec.type_} {spec.formulation}: {J} outputs, "
          f"leading eigenvalues {np.array2string(sol.eigenvalues[:6], precision=4)}")
    return EXIT_OK


def cmd_table(args) -> int:
    traj, world = _trajectory_and_world(args)
    T = len(traj)
    tau_max = min(args.tau_max, T - 1)
    _require(tau_max >= 3, "trajectory too short for C_3")
    sol = sfa.solve(traj, sfa.SfaProblemSpec("tau", 2, "left", tau=1), max_lag=tau_max)
    _require(all(0 <= j < sol.n_outputs for j in args.indices), f"indices must lie in 0..{sol.n_outputs - 1}")
    values = sol.per_output_stats((1, 2, 3), (0.8, 0.9), tau_max)
    values.pop("delta")
    rows = _table_rows(values, args.indices)
    out = _out_dir(args)
    if args.format == "json":
        io.write_json(out / "table.json", {"indices": args.indices, "rows": {r[0]: r[1:] for r in rows}})
    else:
        io.write_table_csv(out / "table.csv", ["statistic"] + [str(j) for j in args.indices], rows)
    width = max(len(r[0]) for r in rows)
    print(" " * width + "".join(f"{j:>7d}" for j in args.indices))
    for r in rows:
        print(f"{r[0]:<{width}}" + "".join(f"{v:7.2f}" for v in r[1:]))
    return EXIT_OK


def cmd_freeresp(args) -> int:
    _require(args.T >= 2, "--T must be at least 2")
    _require(all(0 <= j < args.T for j in args.j), f"--j values must lie in 0..{args.T - 1}")
    rows = [[j, *fr.free_response_stats(j, args.T)] for j in args.j]
    signals = np.column_stack([fr.free_response(j, args.T).values for j in args.j])
    out = _out_dir(args)
    if args.format == "json":
        io.write_json(out / "freeresp.json", {"T": args.T, "rows": rows, "signals": signals.T})
    else:
        io.write_table_csv(out / "freeresp.csv", ["j", "delta", "C1"], rows)
        io.write_table_csv(out / "freeresp_signals.csv", ["t"] + [f"y{j}" for j in args.j],
                           [[t + 1] + [float(v) for v in signals[t]] for t in range(args.T)])
    for j, d, c in rows:
        print(f"j={j:<4d} delta={d:.3f} C1={c:.3f}")
    return EXIT_OK


def cmd_limits(args) -> int:
    traj, world = _trajectory_and_world(args)
    _require(0.0 < args.gamma < 1.0, "--gamma must lie in (0, 1)")
    _require(args.tau_max >= 0, "--tau-max must be non-negative")
    _require(all(t >= 0 for t in args.taus), "--taus must be non-negative")
    _require(set(args.types) <= {1, 2}, "--types must be 1 and/or 2")
    P = gw.build_transition(world)
    cells = ()
    if args.normalized:
        cells = tuple((v, t, f) for t in args.types for v in ("sfa", "tau", "lf") for f in ("symmetric", "left"))
    reports = limits.verify_limits(
        traj, P, None, args.gamma, args.tau_max, args.taus, args.types, args.tolerance, cells, args.sigma2, args.seed
    )
    out = _out_dir(args)
    dicts = [r.to_dict() for r in reports]
    if args.format == "json":
        io.write_json(out / "limits.json", dicts)
    else:
        keys = list(dicts[0])
        io.write_table_csv(out / "limits.csv", keys, [[d[k] for k in keys] for d in dicts])
    failed = [r for r in reports if not r.passed and not r.secondary]
    for r in reports:
        tag = "info" if r.secondary else ("PASS" if r.passed else "FAIL")
        print(f"{tag:4s} {r.target_name:28s} rel={r.relative_error:.4g} tol={r.tolerance:.4g}")
    return EXIT_FAIL if failed else EXIT_OK


def cmd_heatmap(args) -> int:
    traj, world = _trajectory_and_world(args)
    n = world.n_states
    if args.source == "weights":
        _require(bool(args.weights), "--source weights needs --weights")
        W = io.read_matrix_csv(args.weights)
        _require(W.shape[0] == n, "weights do not match the grid")
        _require(0 <= args.index < W.shape[1], f"--index must lie in 0..{W.shape[1] - 1}")
        vector = W[:, args.index]
    elif args.source == "output":
        sol = sfa.solve(traj, sfa.SfaProblemSpec("tau", 2, "left", tau=1))
        _require(0 <= args.index < sol.n_outputs, f"--index must lie in 0..{sol.n_outputs - 1}")
        vector = sol.weights[:, args.index]
    else:
        _require(0 <= args.index < n, f"--index must lie in 0..{n - 1}")
        lag = args.tau if args.source == "stc" else args.tau_max
        _require(0 <= lag < len(traj), "lag exceeds the trajectory length")
        stats = sfa.SfaStatistics.from_states(traj.states, n, lag)
        A = stats.omega_hat[args.tau] if args.source == "stc" else stats.psi(args.gamma, args.tau_max, 2)
        d = np.diag(stats.sigma_hat)
        # Sigma_hat is diagonal for one-hot data; unvisited states give empty rows
        vector = np.divide(A[:, args.index], d, out=np.zeros(n), where=d > 0)
    name = args.name or f"heatmap_{args.source}_{args.index}"
    paths = io.write_heatmap(_out_dir(args) / name, world.to_grid(vector), svg=args.svg)
    print("wrote " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def _eig_chain(args) -> np.ndarray:
    rng = np.random.default_rng(args.seed)
    if args.chain == "gridworld":
        return gw.build_transition(_world(args.lx, args.ly, 0.2))
    if args.chain == "cycle3":
        return np.roll(np.eye(3), 1, axis=1)
    if args.chain == "single":
        return np.ones((1, 1))
    _require(args.n >= 1, "--n must be positive")
    if args.chain == "random":
        return markov.random_ergodic_chain(args.n, rng)
    return markov.random_reversible_chain(args.n, rng)


def cmd_eigcheck(args) -> int:
    _require(0.0 < args.gamma < 1.0, "--gamma must lie in (0, 1)")
    P = _eig_chain(args)
    rel = markov.eigen_relations_check(P, args.gamma, args.tol)
    ir = markov.ir_property_check(P, args.gamma)
    ir_ok = all(v < args.tol for v in ir.values())
    out = _out_dir(args)
    payload = {"eigen_relations": [{k: (str(v) if isinstance(v, complex) else v) for k, v in r.items()} for r in rel],
               "ir_properties": ir, "ir_passed": ir_ok}
    if args.format == "json":
        io.write_json(out / "eigcheck.json", payload)
    else:
        keys = ["matrix", "eigenvalue_P", "multiplicity", "eigenvalue_residual", "vector_residual", "passed"]
        io.write_table_csv(out / "eigcheck.csv", keys, [[payload["eigen_relations"][i][k] for k in keys] for i in range(len(rel))])
    worst = max((max(r["eigenvalue_residual"], r["vector_residual"]) for r in rel), default=0.0)
    print(f"{len(rel)} eigen relations, worst residual {worst:.3g}, "
          f"{sum(not r['passed'] for r in rel)} failed")
    for k, v in ir.items():
        print(f"{k:22s} {v:.3g}")
    return EXIT_OK if ir_ok and all(r["passed"] for r in rel) else EXIT_FAIL


COMMANDS = {
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
    "table": cmd_table,
    "freeresp": cmd_freeresp,
    "limits": cmd_limits,
    "heatmap": cmd_heatmap,
    "eigcheck": cmd_eigcheck,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.config:
            args = _apply_config(parser, argv, args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DefinitenessError, SingularityError, ErgodicityError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SrSfaError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
