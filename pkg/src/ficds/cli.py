"""Command-line interface: ``ficds {analyze,sweep,boundary,simulate,pzmap} CONFIG``.

Exit codes: 0 completed (whatever the verdict), 2 configuration or usage
error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import report
from .config import load
from .errors import (
    AmbiguousEndpointError,
    ConfigError,
    FicdsError,
    InsufficientDataError,
    InvalidParametersError,
    NoBoundaryError,
    PathError,
    RootFindingError,
    TopologyMismatchError,
)
from .sim import segment_verdicts, simulate
from .sweep import SweepSpec, find_boundary, sweep
from .tf import poly_roots
from .topology import analyze, compose, robustness_check

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _override(text: str):
    path, sep, value = text.partition("=")
    if not sep or not path:
        raise argparse.ArgumentTypeError(f"expected PATH=VALUE, got {text!r}")
    try:
        return path.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"value of {path!r} is not a number: {value!r}") from None


def _values(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _range(text: str):
    parts = text.split(":")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"expected LO:HI:COUNT, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected LO:HI:COUNT, got {text!r}")
    return lo, hi, count


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="JSON config file, or the name of a shipped config (e.g. table1_a1)")
    common.add_argument("--set", dest="overrides", action="append", type=_override, default=[], metavar="PATH=VALUE",
                        help="override a parameter, e.g. inverter[0].kp=7.5 or grid.Ls=5e-3 (repeatable)")
    common.add_argument("--pade-order", type=int, default=None, help="Padé order of the delay approximant")
    common.add_argument("--out", default="out", help="output directory (pzmap: directory or .svg path)")

    p = _Parser(prog="ficds", description="Pole-based stability analysis of inverter-dominated microgrids.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("analyze", parents=[common], help="assess the CDS indices and the Padé-order robustness")
    sp = sub.add_parser("sweep", parents=[common], help="assess the system over a range of one parameter")
    sp.add_argument("--param", required=True, help="parameter path, e.g. inverter[0].kp")
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--values", type=_values, help="comma-separated values")
    g.add_argument("--range", type=_range, help="LO:HI:COUNT evenly spaced values")
    sp.add_argument("--workers", type=int, default=None, help="thread count (1 = sequential)")
    bp = sub.add_parser("boundary", parents=[common], help="bisect for the critical value of one parameter")
    bp.add_argument("--param", required=True)
    bp.add_argument("--lo", type=float, required=True)
    bp.add_argument("--hi", type=float, required=True)
    bp.add_argument("--tol", type=float, default=1e-3, help="relative bracket width at which to stop")
    sub.add_parser("simulate", parents=[common], help="time-domain run with per-segment verdicts")
    zp = sub.add_parser("pzmap", parents=[common], help="SVG pole-zero map of a CDS index")
    zp.add_argument("--index", default=None, help="CDS index to plot (default: the deciding index)")
    return p


def _load(args):
    overrides = dict(args.overrides)
    if args.pade_order is not None:
        overrides["analysis.pade_order"] = args.pade_order
    return load(args.config, overrides)


def _outdir(path) -> Path:
    d = Path(path)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _index_summary(a):
    return {
        "verdict": a.verdict,
        "max_real": a.max_real,
        "n_poles": len(a.poles.roots),
        "residual_bound": a.poles.residual_bound,
    }


def cmd_analyze(args) -> int:
    cfg = _load(args)
    an = cfg.analysis
    res = analyze(cfg.topology, an.pade_order, an.threshold_band)
    rob = robustness_check(cfg.topology, an.robustness_orders, an.threshold_band)
    out = _outdir(args.out)
    doc = {
        "command": "analyze",
        "config": str(args.config),
        "overrides": dict(args.overrides),
        "system_id": res.system_id,
        "pade_order": an.pade_order,
        "threshold_band": an.threshold_band,
        "deciding_index": res.primary,
        "verdict": res.verdict,
        "max_real": res.max_real,
        "indices": {k: _index_summary(a) for k, a in res.indices.items()},
        "robustness": {
            "orders": list(rob.orders),
            "verdicts": list(rob.verdicts),
            "max_reals": list(rob.max_reals),
            "flagged": rob.flagged,
        },
    }
    report.write_json(out / "report.json", doc)
    report.write_poles_csv(out / "poles.csv", res.indices)
    primary = res.indices[res.primary]
    zeros = poly_roots(primary.tf.num).roots if primary.tf.num.degree > 0 else ()
    report.plot_pzmap(out / "pzmap.svg", primary.poles.roots, zeros, f"{res.system_id} {res.primary}", an.threshold_band)
    print(f"{res.system_id} {res.primary}: {res.verdict} (max Re = {res.max_real:.6g} rad/s)")
    if rob.flagged:
        print(f"warning: verdict depends on the Padé order: {dict(zip(rob.orders, rob.verdicts))}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    spec = SweepSpec(args.param, args.values) if args.values is not None else SweepSpec(args.param, grid=args.range)
    res = sweep(cfg.topology, spec, cfg.analysis.pade_order, cfg.analysis.threshold_band, workers=args.workers)
    out = _outdir(args.out)
    report.write_sweep_csv(out / "sweep.csv", res)
    report.write_json(out / "report.json", {
        "command": "sweep",
        "config": str(args.config),
        "param": res.param_path,
        "rows": [{"value": r.value, "max_real": r.max_real, "verdict": r.verdict, "error": r.error} for r in res.rows],
        "boundary_bracket": res.boundary_bracket,
    })
    report.plot_sweep(out / "sweep.svg", res)
    for r in res.rows:
        print(f"{res.param_path}={r.value!r}: {r.verdict or 'error: ' + str(r.error)}")
    if res.boundary_bracket:
        print(f"boundary bracket: {res.boundary_bracket}")
    return EXIT_OK


def cmd_boundary(args) -> int:
    cfg = _load(args)
    b = find_boundary(cfg.topology, args.param, args.lo, args.hi, args.tol, cfg.analysis.pade_order, cfg.analysis.threshold_band)
    out = _outdir(args.out)
    report.write_json(out / "report.json", {
        "command": "boundary",
        "config": str(args.config),
        "param": args.param,
        "value": b.value,
        "bracket": [b.lo, b.hi],
        "bracket_verdicts": [b.lo_verdict, b.hi_verdict],
        "iterations": b.iterations,
        "marginal": b.marginal,
    })
    tag = " (marginal midpoint)" if b.marginal else ""
    print(f"{args.param} critical value ~ {b.value!r} in [{b.lo!r}, {b.hi!r}]{tag}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load(args)
    if cfg.simulation is None:
        raise ConfigError("simulation", "the config has no simulation section")
    trace = simulate(cfg.topology, cfg.simulation, cfg.events)
    segs = segment_verdicts(trace)
    pole = []
    for start, topo in trace.topologies:
        pole.append(analyze(topo, cfg.analysis.pade_order, cfg.analysis.threshold_band, all_indices=False).verdict)
    out = _outdir(args.out)
    report.write_trace_csv(out / "trace.csv", trace)
    report.write_json(out / "report.json", {
        "command": "simulate",
        "config": str(args.config),
        "diverged": trace.diverged,
        "diverged_at": trace.diverged_at,
        "markers": [{"t": t, "event": label} for t, label in trace.markers],
        "segments": [
            {"start": s.start, "end": s.end, "verdict": s.verdict, "envelope_slope": s.slope, "periods": s.periods, "pole_verdict": pv}
            for s, pv in zip(segs, pole)
        ],
    })
    report.plot_trace(out / "trace.svg", trace, segs)
    for s, pv in zip(segs, pole):
        print(f"[{s.start:g}, {s.end:g}) s: {s.verdict} (pole verdict: {pv})")
    if trace.diverged:
        print(f"run halted at t = {trace.diverged_at:g} s (blow-up ceiling)")
    return EXIT_OK


def cmd_pzmap(args) -> int:
    cfg = _load(args)
    cds = compose(cfg.topology, cfg.analysis.pade_order)
    key = args.index or next(iter(cds))
    if key not in cds:
        raise ConfigError("--index", f"unknown index {key!r}; available: {', '.join(cds)}")
    tf = cds[key]
    poles = poly_roots(tf.den).roots if tf.den.degree > 0 else ()
    zeros = poly_roots(tf.num).roots if tf.num.degree > 0 else ()
    target = Path(args.out)
    if target.suffix.lower() != ".svg":
        target = _outdir(target) / "pzmap.svg"
    else:
        _outdir(target.parent)
    report.plot_pzmap(target, poles, zeros, f"{cfg.topology.system_id} {key}", cfg.analysis.threshold_band)
    print(str(target))
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "sweep": cmd_sweep,
    "boundary": cmd_boundary,
    "simulate": cmd_simulate,
    "pzmap": cmd_pzmap,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidParametersError, PathError, TopologyMismatchError,
            InsufficientDataError, NoBoundaryError, AmbiguousEndpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RootFindingError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FicdsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
