"""Command-line entry point.

Subcommands: ``check`` (assumption and graph-class report), ``design``
(protocol matrix bundles per agent), ``simulate`` (trajectory CSV export)
and ``report`` (CSV plus an SVG plot of outputs and the error series).
Every behavior is a thin shell over the library; exit codes are 0 success,
2 parse error, 3 assumption violation, 4 divergence.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .errors import (
    AssumptionError,
    DivergenceError,
    NetsyncError,
    ScenarioParseError,
    UnsupportedAgentError,
)
from .protocols import realization_to_text
from .scenario_io import load_scenario, resolve_scenario_path
from .simulation import (
    assemble_network,
    check_scenario,
    error_series,
    simulate,
    trajectory_to_csv,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_ASSUMPTION = 3
EXIT_DIVERGENCE = 4


def _load(args):
    path = resolve_scenario_path(args.scenario)
    scenario = load_scenario(path)
    overrides = {}
    if args.T is not None:
        overrides["T"] = args.T
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        scenario = dataclasses.replace(scenario, **overrides)
    return scenario


def _fmt_matrix(m):
    return np.array2string(np.asarray(m), precision=6, suppress_small=True)


def cmd_check(args):
    scenario = _load(args)
    diagnostics, reports, target, n_d = check_scenario(scenario)
    print(f"scenario: {scenario.label} (mode={scenario.mode}, N={scenario.n_agents})")
    for agent in scenario.agents:
        rep = reports.get(agent.agent_id)
        if rep is None:
            print(f"agent {agent.agent_id}: unsupported output dimension")
            continue
        print(f"agent {agent.agent_id}: n={agent.n} m={agent.m} "
              f"stabilizable={rep.stabilizable} detectable={rep.detectable} "
              f"right_invertible={rep.right_invertible} "
              f"infinite_zero_order={rep.infinite_zero_order}")
    print(f"max infinite-zero order n_d = {n_d}")
    if target is not None:
        print(f"target: n_q = {target.n_q}")
    if scenario.mode == "output_sync":
        print("graph class: directed spanning tree required")
    else:
        members = sorted(scenario.rootset.members) if scenario.rootset else []
        print(f"graph class: root-set connectivity required (roots {members})")
    if diagnostics:
        print("FAILED checks:")
        for line in diagnostics:
            print(f"  - {line}")
        return EXIT_ASSUMPTION
    print("all checks passed")
    return EXIT_OK


def cmd_design(args):
    scenario = _load(args)
    net = assemble_network(scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    for proto in net.protocols:
        dest = out_dir / f"protocol_agent_{proto.agent_id}.txt"
        dest.write_text(realization_to_text(proto))
        print(f"wrote {dest}")
    return EXIT_OK


def _simulate_one(scenario, out_dir):
    net = assemble_network(scenario)
    traj = simulate(net, scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    dest = out_dir / f"{scenario.label}_trajectory.csv"
    dest.write_text(trajectory_to_csv(traj))
    return traj, dest


def _batch_worker(payload):
    path, T, dt, seed, out = payload
    ns = argparse.Namespace(scenario=path, T=T, dt=dt, seed=seed)
    try:
        scenario = _load(ns)
        _, dest = _simulate_one(scenario, Path(out))
        return EXIT_OK, f"wrote {dest}"
    except ScenarioParseError as exc:
        return EXIT_PARSE, f"{path}: {exc}"
    except (AssumptionError, UnsupportedAgentError) as exc:
        return EXIT_ASSUMPTION, f"{path}: {exc}"
    except DivergenceError as exc:
        return EXIT_DIVERGENCE, f"{path}: {exc}"


def cmd_simulate(args):
    paths = [args.scenario] + list(args.extra_scenarios or [])
    if len(paths) > 1 and args.batch > 1:
        payloads = [(p, args.T, args.dt, args.seed, args.out) for p in paths]
        worst = EXIT_OK
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.batch) as pool:
            for code, message in pool.map(_batch_worker, payloads):
                print(message)
                worst = max(worst, code)
        return worst
    for p in paths:
        ns = argparse.Namespace(scenario=p, T=args.T, dt=args.dt, seed=args.seed)
        scenario = _load(ns)
        traj, dest = _simulate_one(scenario, Path(args.out))
        err = error_series(traj)
        print(f"wrote {dest} (final error {err[-1]:.3e})")
    return EXIT_OK


def cmd_report(args):
    scenario = _load(args)
    net = assemble_network(scenario)
    traj = simulate(net, scenario)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_dest = out_dir / f"{scenario.label}_trajectory.csv"
    csv_dest.write_text(trajectory_to_csv(traj))
    svg_dest = out_dir / f"{scenario.label}_report.svg"
    _write_report_svg(traj, svg_dest)
    print(f"wrote {csv_dest}")
    print(f"wrote {svg_dest}")
    return EXIT_OK


def _write_report_svg(traj, dest):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (ax_out, ax_err) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for i in range(traj.n_agents):
        ax_out.plot(traj.times, traj.outputs[:, i], label=f"y_{i + 1}", lw=1.0)
    if traj.y_ref is not None:
        ax_out.plot(traj.times, traj.y_ref, "k--", label="y_r", lw=1.2)
    ax_out.set_ylabel("outputs")
    ax_out.legend(loc="upper right", fontsize=8, ncol=2)
    err = error_series(traj)
    err_name = "e_sync" if traj.mode == "output_sync" else "e_reg"
    positive = np.maximum(err, 1e-18)
    ax_err.semilogy(traj.times, positive, "r-", lw=1.0)
    ax_err.set_ylabel(err_name)
    ax_err.set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(dest, format="svg")
    plt.close(fig)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="netsync",
        description="Synchronization protocol synthesis and simulation for "
                    "heterogeneous linear agent networks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        p.add_argument("scenario", help="scenario file (or bundled scenario name)")
        if multi:
            p.add_argument("extra_scenarios", nargs="*",
                           help="additional scenario files")
        p.add_argument("--T", type=float, default=None, help="override horizon [s]")
        p.add_argument("--dt", type=float, default=None, help="override step [s]")
        p.add_argument("--seed", type=int, default=None, help="override RNG seed")
        p.add_argument("--out", default=".", help="output directory")

    p_check = sub.add_parser("check", help="run assumption and graph-class checks")
    common(p_check)
    p_check.set_defaults(func=cmd_check)

    p_design = sub.add_parser("design", help="write per-agent protocol bundles")
    common(p_design)
    p_design.set_defaults(func=cmd_design)

    p_sim = sub.add_parser("simulate", help="simulate and export trajectory CSV")
    common(p_sim, multi=True)
    p_sim.add_argument("--batch", type=int, default=1,
                       help="worker count for concurrent scenario fan-out")
    p_sim.set_defaults(func=cmd_simulate)

    p_rep = sub.add_parser("report", help="simulate, export CSV and SVG plot")
    common(p_rep)
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (AssumptionError, UnsupportedAgentError) as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        if isinstance(exc, AssumptionError):
            for line in exc.diagnostics:
                print(f"  - {line}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except NetsyncError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION


if __name__ == "__main__":
    sys.exit(main())
