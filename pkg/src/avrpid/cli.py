"""Command-line entry point: ``avrpid {simulate,metrics,bode,tune,bench,sweep}``.

Every flag mirrors a key of the optional JSON ``--config`` file (dashes become
underscores); flags win on conflict and unknown config keys are rejected.
Exit codes: 0 success, 1 usage error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import bench, lintf, metrics, objectives, sim, tuners

USAGE, NUMERICAL = 1, 2
NOMINAL = lintf.AvrParams()
PLANT_KEYS = {"ka": "K_A", "ta": "T_A", "ke": "K_E", "te": "T_E",
              "kg": "K_G", "tg": "T_G", "ks": "K_S", "ts": "T_S"}


class UsageError(Exception):
    pass


def _g(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.6g}"


def _parse_gains(text: str) -> lintf.PidGains:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"gains must be three comma-separated numbers, got {text!r}") from None
    if len(vals) != 3:
        raise UsageError("gains must be K_p,K_i,K_d")
    try:
        g = lintf.PidGains(*vals)
    except lintf.InvalidParameterError as exc:
        raise UsageError(str(exc)) from None
    if g.is_zero:
        raise UsageError("all-zero gains leave no forward path")
    return g


def _parse_event(text: str) -> sim.DisturbanceEvent:
    try:
        t, m = text.split(":")
        return sim.DisturbanceEvent(float(t), float(m))
    except ValueError:
        raise UsageError(f"disturbance must be TIME:MAGNITUDE, got {text!r}") from None


def _common(p: argparse.ArgumentParser, horizon: float = 20.0):
    p.add_argument("--config", help="JSON file whose keys mirror these flags")
    grp = p.add_argument_group("plant (nominal values shown)")
    for flag, name in PLANT_KEYS.items():
        grp.add_argument(f"--{flag}", type=float, default=getattr(NOMINAL, name),
                         help=name)
    p.add_argument("--dt", type=float, default=1e-3, help="time step in s")
    p.add_argument("--horizon", type=float, default=horizon,
                   help="simulation horizon in s")


def _subcommand(sub, name: str, help: str) -> argparse.ArgumentParser:
    return sub.add_parser(name, help=help, formatter_class=argparse.ArgumentDefaultsHelpFormatter)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="avrpid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = _subcommand(sub, "simulate", "step or disturbance response -> CSV + metrics")
    _common(p)
    p.add_argument("--gains", help="K_p,K_i,K_d (omit for the loop without controller)")
    p.add_argument("--disturbance", action="append", default=[], metavar="T:MAG",
                   help="persistent load step at the generator input (repeatable)")
    p.add_argument("--out", help="write t,v CSV here")

    p = _subcommand(sub, "metrics", "transient metrics of a t,v CSV trajectory")
    p.add_argument("--config")
    p.add_argument("--input", required=True)
    p.add_argument("--reference", type=float, default=1.0)
    p.add_argument("--rise", choices=["10-90", "0-100"], default="10-90")

    p = _subcommand(sub, "bode", "frequency metrics + sampled magnitude/phase CSV")
    _common(p)
    p.add_argument("--gains", required=True)
    p.add_argument("--margin-source", choices=["closed", "loop"], default="closed")
    p.add_argument("--out", help="write omega,magnitude_db,phase_deg CSV of the closed loop")

    p = _subcommand(sub, "tune", "run an optimizer or Ziegler-Nichols")
    _common(p, horizon=10.0)
    p.add_argument("--algo", choices=["pso", "de", "goa", "zn"], default="pso")
    p.add_argument("--objective", default="ITSE", type=str.upper, choices=objectives.KINDS)
    p.add_argument("--pop", type=int, default=50)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lower", type=float, default=0.01)
    p.add_argument("--upper", type=float, default=2.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--mu", type=float, default=50.0)
    p.add_argument("--history", help="write iteration,best_value CSV here")

    p = _subcommand(sub, "bench", "reproduce the reference gain table")
    _common(p)
    p.add_argument("--rows", help="comma-separated algorithm names (default: all)")
    p.add_argument("--table", help="reference table JSON (default: bundled)")
    p.add_argument("--tolerances", help="tolerance JSON (default: bundled)")
    p.add_argument("--out", help="report path")
    p.add_argument("--format", choices=["csv", "json"], default="csv")

    p = _subcommand(sub, "sweep", "robustness sweep of the plant time constants")
    _common(p)
    p.add_argument("--gains", default="1.1281,0.9567,0.5671",
                   help="K_p,K_i,K_d")
    p.add_argument("--params", default="T_A,T_E,T_G,T_S")
    p.add_argument("--levels", default="-0.5,-0.25,0,0.25,0.5")
    p.add_argument("--out", help="write sweep CSV here")
    return ap


def _apply_config(ap: argparse.ArgumentParser, args: argparse.Namespace, argv: Sequence[str]):
    if not getattr(args, "config", None):
        return args
    with open(args.config) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    known = set(vars(args)) - {"command", "config"}
    unknown = set(k.replace("-", "_") for k in cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    for k, v in cfg.items():
        key = k.replace("-", "_")
        if key not in given:
            setattr(args, key, v)
    return args


def _plant(args) -> lintf.AvrParams:
    try:
        return lintf.AvrParams(**{name: getattr(args, flag) for flag, name in PLANT_KEYS.items()})
    except lintf.InvalidParameterError as exc:
        raise UsageError(str(exc)) from None


def _grid(args) -> sim.SimGrid:
    try:
        return sim.SimGrid(args.dt, args.horizon)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _print_metrics(m: metrics.TransientMetrics, out=None):
    out = out or sys.stdout
    for k, v in m.as_dict().items():
        print(f"{k}: {v if isinstance(v, str) else _g(v)}", file=out)


def cmd_simulate(args) -> int:
    p, grid = _plant(args), _grid(args)
    g = _parse_gains(args.gains) if args.gains else None
    events = [_parse_event(e) for e in args.disturbance]
    r = sim.scenario_response(p, g, events, grid)
    if args.out:
        sim.write_csv(r, args.out)
    _print_metrics(metrics.transient_metrics(r, require_settled=not events))
    return 0


def cmd_metrics(args) -> int:
    r = sim.read_csv(args.input, args.reference)
    _print_metrics(metrics.transient_metrics(r, rise=args.rise))
    return 0


def cmd_bode(args) -> int:
    p, g = _plant(args), _parse_gains(args.gains)
    closed = lintf.avr_pid_closed_loop(p, g)
    fm = metrics.frequency_metrics(lintf.loop_tf(p, g), closed, margin_source=args.margin_source)
    for k in ("peak_gain_db", "phase_margin_deg", "gain_crossover", "delay_margin_s", "bandwidth"):
        print(f"{k}: {_g(getattr(fm, k))}")
    if args.out:
        w = np.logspace(-2, 3, 2000)
        with open(args.out, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["omega", "magnitude_db", "phase_deg"])
            for row in metrics.bode_table(closed, w):
                wr.writerow([repr(float(x)) for x in row])
    return 0


def cmd_tune(args) -> int:
    p = _plant(args)
    if args.algo == "zn":
        g = tuners.ziegler_nichols(p)
        history = None
    else:
        spec = objectives.ObjectiveSpec(args.objective, beta=args.beta, mu=args.mu, grid=_grid(args))
        cfg = tuners.OptimizerConfig(args.algo, args.pop, args.iters, args.seed,
                                     workers=bench.default_workers())
        res = tuners.optimize(objectives.objective_closure(p, spec),
                              tuners.Bounds.box(args.lower, args.upper), cfg)
        g = res.best_gains
        history = res.history
        print(f"best_value: {_g(res.best_value)}")
        print(f"evaluations: {res.evaluations}")
    print(f"K_p: {_g(g.K_p)}")
    print(f"K_i: {_g(g.K_i)}")
    print(f"K_d: {_g(g.K_d)}")
    try:
        _print_metrics(bench.closed_loop_metrics(p, g))
    except ValueError as exc:
        print(f"metrics unavailable: {exc}", file=sys.stderr)
    if args.history and history is not None:
        with open(args.history, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["iteration", "best_value"])
            for i, v in enumerate(history, 1):
                wr.writerow([i, repr(v)])
    return 0


def cmd_bench(args) -> int:
    p = _plant(args)
    entries = bench.load_reference_table(args.table)
    if args.rows:
        try:
            entries = bench.select_entries(entries, args.rows.split(","))
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from None
    tol = bench.load_tolerances(args.tolerances)
    report = bench.reproduce_table(entries, p, tol)
    for row in report.rows:
        failed = [c.metric for c in row.comparisons if not c.passed]
        print(f"{row.algorithm}: {row.status} ({len(row.comparisons)} compared"
              + (f", off: {','.join(failed)}" if failed else "") + ")")
    if args.out:
        bench.emit_report(report, args.out, args.format)
    return 0


def cmd_sweep(args) -> int:
    p, g = _plant(args), _parse_gains(args.gains)
    try:
        levels = tuple(float(x) for x in args.levels.split(","))
        spec = bench.SweepSpec(tuple(x.strip() for x in args.params.split(",")), levels)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    rows = bench.robustness_sweep(p, g, spec)
    for r in rows:
        m = r.metrics
        tail = (f"Mp={_g(m.Mp_pct)}% Tr={_g(m.Tr)} Ts={_g(m.Ts)} Tp={_g(m.Tp)} Ess={_g(m.Ess)}"
                if m else "unstable")
        print(f"{r.parameter} {r.level:+.2f}: {tail}")
    if args.out:
        bench.emit_sweep(rows, args.out)
    return 0


COMMANDS = {"simulate": cmd_simulate, "metrics": cmd_metrics, "bode": cmd_bode,
            "tune": cmd_tune, "bench": cmd_bench, "sweep": cmd_sweep}


def dispatch(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else USAGE
    try:
        args = _apply_config(ap, args, argv)
        return COMMANDS[args.command](args)
    except (UsageError, FileNotFoundError, KeyError, bench.ReferenceTableError) as exc:
        print(f"avrpid: error: {exc}", file=sys.stderr)
        return USAGE
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"avrpid: numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
