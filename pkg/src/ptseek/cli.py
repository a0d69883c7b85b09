"""Command-line front end: ``ptseek run|sweep|plot|verify``.

Exit codes: 0 success, 1 unexpected error, 2 unparseable input (nothing is
written), 3 the run diverged, 4 a declared check (peak deadline, envelope
bound, acceptance criterion) failed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import acceptance, analysis, plotting
from .scenario import ScenarioError, load_scenario, run_scenario
from .sim import TrajectoryFormatError, write_csv

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_DIVERGED = 3
EXIT_CHECK = 4


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def report_header(scn) -> list[tuple[str, object]]:
    f = scn.field
    rows = [
        ("name", scn.name),
        ("variant", scn.variant),
        ("field", f.kind),
        ("source", f"{f.source[0]:.17g}, {f.source[1]:.17g}"),
        ("peak", float(f.peak)),
        ("drift", scn.drift.kind),
        ("t0", float(scn.warp.t0)),
        ("T", float(scn.warp.T)),
        ("clip_floor", float(scn.warp.clip_floor)),
    ]
    return rows


def cmd_run(args) -> int:
    try:
        scn = load_scenario(args.file)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_scenario(scn)
    traj = result.trajectory

    csv_path = write_csv(traj, out / f"{scn.name}.csv")
    header = report_header(scn)
    header.append(("status", traj.status))
    if traj.escape_time is not None:
        header.append(("escape_time", traj.escape_time))
    if result.envelope is not None:
        header += [("envelope_pass", result.envelope.passed),
                   ("envelope_min_slack", result.envelope.min_slack),
                   ("envelope_note", "bound constants are grid estimates")]
    for i, failure in enumerate(result.failures):
        header.append((f"check_failed_{i + 1}", failure))
    if result.report is not None:
        (out / f"{scn.name}.report.txt").write_text(analysis.report_text(result.report, header))
        (out / f"{scn.name}.report.csv").write_text(analysis.report_csv(result.report))
    else:
        lines = [f"{k} = {v}" for k, v in header]
        (out / f"{scn.name}.report.txt").write_text("\n".join(lines) + "\n")
    written = [csv_path]
    if not args.no_figures and traj.kind != "scalar":
        meta = plotting.PlotMeta(scn.field.source, scn.field.peak, scn.warp.t_end)
        written += plotting.render([traj], [scn.name], scn.name, out, meta)
    for p in written:
        print(p)

    if result.diverged:
        print(f"diverged at t={traj.escape_time}", file=sys.stderr)
        return EXIT_DIVERGED
    if result.failures:
        for failure in result.failures:
            print(f"check failed: {failure}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        base = load_scenario(args.file)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        res = analysis.sweep_practical_convergence(base, args.omega, args.mu, args.tol or ())
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    long_path = out / f"{base.name}_sweep.csv"
    long_path.write_text(res.to_long_csv())
    matrix_path = out / f"{base.name}_sweep_matrix.csv"
    matrix_path.write_text(res.to_matrix_csv())
    print(long_path)
    print(matrix_path)
    print("row best: " + ", ".join(f"omega={w:g}: {b:.6g}" for w, b in zip(res.omegas, res.row_best)))
    for tol, ok in res.tolerances.items():
        print(f"tolerance {tol:g}: {'achieved' if ok else 'not achieved'}")
    for finding in res.banded_findings():
        print(f"finding: {finding}")
    return EXIT_OK


def cmd_plot(args) -> int:
    meta = None
    if args.source is not None or args.peak is not None or args.horizon is not None:
        src = tuple(args.source) if args.source is not None else None
        meta = plotting.PlotMeta(src, args.peak, args.horizon)
    try:
        written = plotting.plot_csv_files(args.csv, args.out, args.overlay, args.name, meta)
    except (TrajectoryFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    for p in written:
        print(p)
    return EXIT_OK


def cmd_verify(args) -> int:
    results = acceptance.run_all(args.filter, args.timings, sys.stdout)
    if not results:
        print(f"no criterion matches {args.filter!r}", file=sys.stderr)
        return EXIT_ERROR
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptseek",
                                     description="Prescribed-time source seeking simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario file (or bundled scenario name)")
    p.add_argument("file")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--no-figures", action="store_true", help="skip the SVG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="final distance over an omega x mu grid")
    p.add_argument("file")
    p.add_argument("--omega", type=_float_list, required=True, help="ascending, comma separated")
    p.add_argument("--mu", type=_float_list, required=True, help="descending, comma separated")
    p.add_argument("--tol", type=_float_list, help="distances to test for achievability")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="render SVG figures from trajectory CSVs")
    p.add_argument("csv", nargs="+")
    p.add_argument("--overlay", action="store_true", help="draw all trajectories on shared axes")
    p.add_argument("--out", help="output directory (default: next to each CSV)")
    p.add_argument("--name", help="file stem for the figures")
    p.add_argument("--source", type=float, nargs=2, metavar=("X1", "X2"))
    p.add_argument("--peak", type=float)
    p.add_argument("--horizon", type=float, help="time of the t0 + T marker")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--filter", help="criterion number or substring of its name")
    p.add_argument("--timings", action="store_true", help="append wall-clock seconds per criterion")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
