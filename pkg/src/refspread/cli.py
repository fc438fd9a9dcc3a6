"""Command line front end: ``refspread {run,plot,reference,check}``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import metrics
from .audit import audit_log
from .control import ALL_STRATEGIES, Strategy
from .experiment import ExperimentSpec, load_config, run_experiment, simulate
from .reference import export_reference_csv, scenario_reference

log = logging.getLogger("refspread")


def _spec_from_args(args) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec()
    kw = {}
    if getattr(args, "model", None):
        kw["models"] = ("rigid", "flexible") if args.model == "both" else (args.model,)
    if getattr(args, "strategy", None):
        kw["strategies"] = ALL_STRATEGIES if args.strategy == ["all"] else tuple(args.strategy)
    if getattr(args, "out", None):
        kw["out"] = Path(args.out)
    sim = spec.sim
    if args.offset is not None:
        sim = sim.replace(plank_offset=args.offset)
    if args.seed is not None:
        sim = sim.replace(seed=args.seed)
    if getattr(args, "jobs", None):
        kw["jobs"] = args.jobs
    if getattr(args, "plot", False):
        kw["plot"] = True
    return spec.replace(sim=sim, **kw)


def _nominal_factory(spec: ExperimentSpec):
    def make(model):
        log.info("running zero-offset nominal %s simulation", model)
        sim = spec.sim.replace(plank_offset=0.0, offset_jitter=0.0, strategy=Strategy.RS_WITH_INTERMEDIATE)
        return simulate(model, spec.params, spec.scenario, sim)
    return make


def cmd_run(args) -> int:
    spec = _spec_from_args(args)
    results = run_experiment(spec)
    status = 0
    for r in results:
        if r.ok:
            s = r.summary
            print(f"{r.model:9s} {r.strategy.value:19s} ok   intermediate {s['intermediate_duration']:.4f} s  "
                  f"inter-impact max|tau| {s['inter_impact_max_torque']:.3f} Nm  ({r.seconds:.1f} s)")
        else:
            status = 1
            print(f"{r.model:9s} {r.strategy.value:19s} FAILED {r.error}")
    print(f"summary: {spec.out / 'summary.txt'}")
    if spec.plot and status == 0:
        from .plots import emit_plots
        for p in emit_plots([r.csv_path for r in results], spec.out, nominal_factory=_nominal_factory(spec)):
            print(f"figure: {p}")
    return status


def cmd_plot(args) -> int:
    from .plots import emit_plots
    spec = _spec_from_args(args)
    csvs = [Path(p) for p in args.csv]
    if len(csvs) == 1 and csvs[0].is_dir():
        csvs = sorted(p for p in csvs[0].glob("*.csv") if not p.stem.endswith("_events"))
    out = Path(args.out) if args.out else (csvs[0].parent if csvs else Path("."))
    window = tuple(args.window) if args.window else None
    for p in emit_plots(csvs, out, nominal_factory=_nominal_factory(spec), window=window):
        print(f"figure: {p}")
    return 0


def cmd_reference(args) -> int:
    spec = _spec_from_args(args)
    refs = scenario_reference(spec.params, spec.scenario)
    out = Path(args.out) if args.out else Path("reference.csv")
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "reference.csv"
    with open(out, "w") as fh:
        export_reference_csv(refs, fh, args.dt)
    print(f"reference: {out}")
    print(f"q_minus = {refs.q_minus.tolist()}")
    print(f"qdot_plus = {refs.qdot_plus.tolist()}")
    return 0


def cmd_check(args) -> int:
    from .plots import load_run
    status = 0
    for p in args.csv:
        run = load_run(p)
        rep = audit_log(run)
        print(f"== {p}")
        for line in rep.lines():
            print("  " + line)
        s = metrics.summary(run)
        print(f"  intermediate duration {s['intermediate_duration']:.4f} s, "
              f"inter-impact max|tau| {s['inter_impact_max_torque']:.3f} Nm")
        status |= 0 if rep.ok else 1
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="refspread", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        p.add_argument("--config", help="INI file with [experiment]/[model]/[scenario]/[simulation]")
        if model:
            p.add_argument("--model", choices=("rigid", "flexible", "both"))
            p.add_argument("--strategy", nargs="+", metavar="S",
                           help="rs_intermediate, rs_no_intermediate, no_rs or all")
        p.add_argument("--offset", type=float, help="initial plank offset [rad]")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")

    p = sub.add_parser("run", help="simulate and write CSV logs plus summary.txt")
    common(p)
    p.add_argument("--jobs", type=int, help="parallel runs")
    p.add_argument("--plot", action="store_true", help="also write the comparison figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="comparison figures from run CSVs")
    p.add_argument("csv", nargs="+", help="run CSVs or one run directory")
    common(p)
    p.add_argument("--window", nargs=2, type=float, metavar=("T0", "T1"))
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("reference", help="export the extended references")
    common(p, model=False)
    p.add_argument("--dt", type=float, default=1e-3)
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("check", help="invariant audit of run CSVs")
    p.add_argument("csv", nargs="+")
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "strategy", None):
        try:
            args.strategy = ["all"] if args.strategy == ["all"] else [Strategy.parse(s).value for s in args.strategy]
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
