"""Command-line entry point: ``wpduality <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import capacity, counts, experiments, optics, qstate, tomography

DEFAULT_STATES = ["phi1", "phi2", "phi3", "phi4"]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--state", action="append", default=None,
                   help="preset (phi1..phi4, mixed) or state file; repeatable")
    p.add_argument("--convention", choices=["main", "appendix"], default="appendix")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--counts-per-axis", type=float, default=counts.DEFAULT_RATE,
                   help="expected coincidences per measurement axis (default: %(default)s)")
    p.add_argument("--repeats", type=int, default=counts.DEFAULT_REPEATS)
    p.add_argument("--analytic-only", action="store_true")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("--e-joules", type=float, default=capacity.E_JOULES)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wpduality", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capacities", help="closed-form C_p, C_d, C_v per state")
    _common(p)

    p = sub.add_parser("scan", help="phase scan of the wave-configuration energy")
    _common(p)
    p.add_argument("--points", type=int, default=optics.DEFAULT_SCAN_POINTS)

    p = sub.add_parser("simulate", help="simulated tomography count files")
    _common(p)

    p = sub.add_parser("tomo", help="maximum-likelihood reconstruction")
    _common(p)
    p.add_argument("--counts", type=Path, default=None, help="count file (axis,repeat,n0,n1)")
    p.add_argument("--bootstrap", type=int, default=0, help="bootstrap replicates for capacity errors")

    p = sub.add_parser("reproduce", help="rerun one figure experiment")
    _common(p)
    p.add_argument("--figure", type=int, choices=[3, 4, 5], required=True)
    p.add_argument("--sim-phases", type=int, default=experiments.DEFAULT_SIM_PHASES)
    p.add_argument("--bootstrap", type=int, default=100)

    p = sub.add_parser("proptest", help="random-state sweep of the duality invariants")
    _common(p)
    p.add_argument("--n-states", type=int, default=10_000)
    return parser


def _states(args) -> list[tuple[str, qstate.DensityMatrix]]:
    return [experiments.resolve_state(s) for s in (args.state or DEFAULT_STATES)]


def _noise(args) -> counts.NoiseModel:
    return counts.NoiseModel.for_counts(args.counts_per_axis, args.repeats, args.seed)


def _emit(doc, args, filename: str) -> None:
    text = json.dumps(experiments._clean(doc), indent=2, sort_keys=True) + "\n"
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / filename).write_text(text)
    sys.stdout.write(text)


def cmd_capacities(args) -> int:
    conv = optics.convention_from_name(args.convention)
    doc = {}
    for name, rho in _states(args):
        rep = capacity.duality_check(rho, conv, args.e_joules)
        doc[name] = rep.to_dict() | {"stokes": qstate.state_to_record(rho)["stokes"]}
    _emit(doc, args, "capacities.json")
    return 0 if all(r["inequality_ok"] for r in doc.values()) else 1


def cmd_scan(args) -> int:
    conv = optics.convention_from_name(args.convention)
    for name, rho in _states(args):
        scan = optics.phase_scan(rho, conv, args.points)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            scan.to_csv(args.out / f"scan_{name}.csv")
            meta = {"state": name, "convention": str(conv), "stokes": qstate.state_to_record(rho)["stokes"],
                    "n_points": args.points}
            (args.out / f"scan_{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        else:
            sys.stdout.write(f"# state={name} convention={conv}\nphi_radians,W_over_E\n")
            for p, w in zip(scan.phases, scan.energies):
                sys.stdout.write(f"{p:.12g},{w:.12g}\n")
    return 0


def cmd_simulate(args) -> int:
    noise = _noise(args)
    for i, (name, rho) in enumerate(_states(args)):
        recs = counts.simulate_counts(rho, noise, stream=i)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            counts.write_counts_csv(recs, args.out / f"counts_{name}.csv")
            meta = {"state": name, "noise": experiments.ExperimentConfig(states=[(name, rho)]).metadata()["noise"]
                    | {"seed": args.seed, "stream": i}}
            (args.out / f"counts_{name}.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        else:
            sys.stdout.write(f"# state={name} seed={args.seed} stream={i}\n")
            counts.write_counts_csv(recs, sys.stdout)
    return 0


def cmd_tomo(args) -> int:
    conv = optics.convention_from_name(args.convention)
    jobs = []
    if args.counts is not None:
        target = _states(args)[0][1] if args.state else None
        jobs.append((args.counts.stem, counts.read_counts_csv(args.counts), target))
    else:
        noise = _noise(args)
        for i, (name, rho) in enumerate(_states(args)):
            jobs.append((name, counts.simulate_counts(rho, noise, stream=i), rho))
    doc, ok = {}, True
    for name, recs, target in jobs:
        res = tomography.mle_reconstruct(recs, target=target)
        rep = capacity.duality_check(res.rho_hat, conv, args.e_joules)
        if args.bootstrap:
            boot = tomography.bootstrap_capacities(recs, args.bootstrap, conv, args.seed)
            rep.std_errors = boot.to_dict()
        doc[name] = res.to_dict() | {"capacities": rep.to_dict()}
        ok &= res.converged
    _emit(doc, args, "tomography.json")
    return 0 if ok else 1


def cmd_reproduce(args) -> int:
    config = experiments.ExperimentConfig(
        states=_states(args),
        convention=optics.convention_from_name(args.convention),
        noise=_noise(args),
        analytic_only=args.analytic_only,
        output_dir=args.out,
        E_joules=args.e_joules,
        n_sim_phases=args.sim_phases,
        bootstrap=args.bootstrap,
    )
    report = experiments.FIGURES[args.figure](config)
    if args.out is not None:
        report.write(args.out)
    sys.stdout.write(report.to_json())
    return 0 if report.passed else 1


def cmd_proptest(args) -> int:
    summary = experiments.run_property_suite(args.seed, args.n_states)
    _emit(summary, args, "proptest.json")
    return 0 if summary["passed"] else 1


COMMANDS = {
    "capacities": cmd_capacities,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "tomo": cmd_tomo,
    "reproduce": cmd_reproduce,
    "proptest": cmd_proptest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
