"""Command-line front end.

Exit codes: 0 success, 1 validation or semantic failure, 2 usage or
configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import analytics
from .core import ConfigError, ParseError, Scheme, make_config, parse_action_list, serialize_action_list
from .gantt import FORMATS, trace_to_gantt
from .schedulers import generate_schedule, make_placement
from .simulator import CostModel, simulate
from .validator import validate

OUT_DIR_ENV = "WAVEPIPE_OUT_DIR"

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _cost_value(text: str):
    # keep integers and plain decimals exact so ratios print cleanly
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("costs must be nonnegative")
    return int(value) if value.denominator == 1 else value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _add_costs(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tf", type=_cost_value, default=1, help="forward time per stage (default 1)")
    p.add_argument("--tb", type=_cost_value, default=2, help="backward time per stage (default 2)")
    p.add_argument("--tc", type=_cost_value, default=0, help="point-to-point transfer time (default 0)")


def _costs(args) -> CostModel:
    return CostModel(args.tf, args.tb, args.tc)


def _resolve_out(out: Optional[str], default_name: str) -> Optional[Path]:
    if out:
        return Path(out)
    env = os.environ.get(OUT_DIR_ENV)
    if env:
        return Path(env) / default_name
    return None


def _write(path: Optional[Path], data) -> None:
    if path is None:
        text = data.decode() if isinstance(data, bytes) else data
        sys.stdout.write(text)
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO) from None


def _load(path: str):
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}", EXIT_IO) from None
    try:
        return parse_action_list(data, validate=False)
    except ParseError as exc:
        raise CliError(f"parse error: {exc}", EXIT_USAGE) from None


def _config(args):
    try:
        return make_config(args.scheme, args.devices, args.microbatches, args.waves, args.replicas)
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None


# --------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    config = _config(args)
    alist = generate_schedule(make_placement(config), config, _costs(args))
    name = f"{config.scheme.value}-P{config.P}-B{config.B}-W{config.W}.json"
    path = _resolve_out(args.out, name)
    _write(path, serialize_action_list(alist))
    if path is not None:
        print(f"wrote {path} ({config.S} slices, {sum(len(a) for a in alist.per_device)} actions)",
              file=sys.stderr)
    return EXIT_OK


def cmd_validate(args) -> int:
    report = validate(_load(args.file))
    if args.json:
        print(report.to_json())
    elif report.diagnostics:
        print(report.render())
    else:
        print("ok: completeness, dependencies, deadlock, flush")
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_simulate(args) -> int:
    alist = _load(args.file)
    report = validate(alist)
    if not report.ok:
        print(report.render(), file=sys.stderr)
        if not args.force:
            print("refusing to simulate an invalid schedule (use --force)", file=sys.stderr)
            return EXIT_INVALID
    trace = simulate(alist, _costs(args))
    metrics = analytics.metrics(trace, alist.placement)
    if args.json:
        print(json.dumps(metrics.to_dict(), indent=1, sort_keys=True))
    else:
        print(metrics.render())
    if args.trace_out:
        _write(Path(args.trace_out), trace.to_json())
    if args.gantt:
        stem = Path(args.file).stem
        path = _resolve_out(args.gantt_out, f"{stem}.{args.gantt}") or Path(args.file).with_suffix(
            f".{args.gantt}")
        _write(path, trace_to_gantt(trace, args.gantt, alist.config))
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_render(args) -> int:
    alist = _load(args.file)
    trace = simulate(alist, _costs(args))
    _write(_resolve_out(args.out, f"{Path(args.file).stem}.{args.format}"),
           trace_to_gantt(trace, args.format, alist.config))
    return EXIT_OK


def _split(text: str) -> list:
    return [s.strip() for s in text.split(",") if s.strip()]


def cmd_compare(args) -> int:
    names = _split(args.schemes)
    if not names:
        raise CliError("no schemes given", EXIT_USAGE)
    try:
        schemes = [Scheme.parse(n) for n in names]
    except ConfigError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    items = []
    for scheme in schemes:
        # the sweep is a Hanayo axis; chimera-wave keeps --waves (its reference form is W=1)
        if scheme is Scheme.HANAYO and args.waves_sweep:
            waves = range(1, args.waves_sweep + 1)
        elif scheme.is_wave:
            waves = [args.waves]
        else:
            waves = [1]
        items += [(scheme, args.devices, args.microbatches, w, args.replicas) for w in waves]
    rows = analytics.compare(items, _costs(args))
    text = analytics.rows_to_json(rows) if args.json else analytics.rows_to_csv(rows)
    _write(_resolve_out(args.out, "compare.json" if args.json else "compare.csv"), text)
    return EXIT_OK if any(r.error is None for r in rows) else EXIT_INVALID


def cmd_analyze(args) -> int:
    if args.curves:
        try:
            Ps = [int(p) for p in _split(args.curves)]
        except ValueError:
            raise CliError(f"bad device list {args.curves!r}", EXIT_USAGE) from None
        if not Ps or min(Ps) < 2:
            raise CliError("curve device counts must be >= 2", EXIT_USAGE)
        waves = range(1, (args.waves_sweep or 4) + 1)
        rows = analytics.bubble_curves(Ps, waves, _costs(args), simulated=not args.analytic_only)
        _write(_resolve_out(args.out, "curves.csv"), analytics.curves_to_csv(rows))
        return EXIT_OK

    P, W = args.devices, args.waves
    try:
        out = {
            "P": P, "W": W,
            "bubble_ratio": analytics.analytic_bubble_hanayo(P, W, args.tf, args.tb, args.tc),
            "simplified": analytics.analytic_bubble_simplified(P, W),
            "chimera_K": analytics.analytic_chimera_K(P),
            "zones": [analytics.zone_bubbles(analytics.ZoneBubbleInput(P, W, lr, args.tf, args.tb, args.tc))
                      for lr in range(P)],
        }
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from None
    if args.json:
        def plain(x):
            if isinstance(x, dict):
                return {k: plain(v) for k, v in x.items()}
            if isinstance(x, list):
                return [plain(v) for v in x]
            return float(x) if isinstance(x, Fraction) else x
        print(json.dumps(plain(out), indent=1, sort_keys=True))
        return EXIT_OK
    print(f"P={P} W={W} T_F={args.tf} T_B={args.tb} T_C={args.tc}")
    print(f"bubble ratio (zone model)   {out['bubble_ratio']}  ~ {float(out['bubble_ratio']):.4f}")
    print(f"simplified (T_B=2T_F, T_C=0) {out['simplified']}  ~ {float(out['simplified']):.4f}")
    print(f"chimera K                    {out['chimera_K']}")
    print("LR  zone A    zone B    C_first  C_second")
    for lr, z in enumerate(out["zones"]):
        print(f"{lr:<3} {str(z['A']):<9} {str(z['B']):<9} {str(z['C_first']):<8} {z['C_second']}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wavepipe", description="Pipeline-parallel schedule toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit an action list")
    p.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    p.add_argument("--devices", "-P", type=_positive, required=True)
    p.add_argument("--microbatches", "-B", type=_positive, required=True)
    p.add_argument("--waves", "-W", type=_positive, default=1)
    p.add_argument("--replicas", "-D", type=_positive, default=1)
    p.add_argument("--out", "-o", help=f"output file (default: ${OUT_DIR_ENV}/<name>.json or stdout)")
    _add_costs(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("validate", help="run the structural checks")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="simulate and report metrics")
    p.add_argument("file")
    _add_costs(p)
    p.add_argument("--json", action="store_true")
    p.add_argument("--gantt", choices=FORMATS)
    p.add_argument("--gantt-out", help="gantt destination (default: next to FILE)")
    p.add_argument("--trace-out", help="write the trace as JSON")
    p.add_argument("--force", action="store_true", help="simulate even if validation fails")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render", help="gantt chart of a simulated schedule")
    p.add_argument("file")
    p.add_argument("--format", choices=FORMATS, default="svg")
    p.add_argument("--out", "-o")
    _add_costs(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="simulate several schemes side by side")
    p.add_argument("--devices", "-P", type=_positive, required=True)
    p.add_argument("--microbatches", "-B", type=_positive, required=True)
    p.add_argument("--schemes", required=True, help="comma-separated scheme names")
    p.add_argument("--waves", "-W", type=_positive, default=1)
    p.add_argument("--waves-sweep", type=_positive, metavar="MAX", help="Hanayo rows for W = 1..MAX")
    p.add_argument("--replicas", "-D", type=_positive, default=1)
    p.add_argument("--json", action="store_true", help="JSON instead of CSV")
    p.add_argument("--out", "-o")
    _add_costs(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("analyze", help="closed-form bubble model")
    p.add_argument("--devices", "-P", type=_positive, default=4)
    p.add_argument("--waves", "-W", type=_positive, default=1)
    p.add_argument("--curves", metavar="P,P,...", help="emit bubble-ratio curves CSV for these device counts")
    p.add_argument("--waves-sweep", type=_positive, metavar="MAX")
    p.add_argument("--analytic-only", action="store_true", help="skip simulation in --curves")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", "-o")
    _add_costs(p)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
