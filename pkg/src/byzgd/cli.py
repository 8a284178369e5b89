"""Command line entry point: ``byzgd run|analyze|sweep``."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from byzgd import analysis
from byzgd.config import ConfigError, RunConfig, apply_overrides, from_document, load_config, read_document
from byzgd.server import Trace, run

logger = logging.getLogger("byzgd")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_DIVERGED = 2
EXIT_IO = 3


def _fmt(x: float) -> str:
    return repr(float(x))


def trace_header(d: int) -> list[str]:
    return ["t", "error"] + [f"w_{k}" for k in range(d)] + ["direction_norm", "filtered_ids"]


def trace_to_csv(trace: Trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trace_header(trace.d))
    for t, (w, err, dn, kept) in enumerate(zip(trace.w, trace.error, trace.direction_norm, trace.kept)):
        writer.writerow([t, _fmt(err), *(_fmt(v) for v in w), _fmt(dn), ";".join(str(i) for i in kept)])
    if trace.diverged:
        buf.write(f"# status: {trace.status} {trace.message}\n")
    return buf.getvalue()


def _write(text: str, out: Optional[str]) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def cmd_run(config: RunConfig, out: Optional[str] = None) -> int:
    trace = run(config)
    _write(trace_to_csv(trace), out if out is not None else config.output)
    if trace.diverged:
        logger.error("run aborted: %s", trace.message)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_analyze(config: RunConfig, out: Optional[str] = None) -> int:
    report = analysis.analyze(config.problem, config.byzantine_ids)
    payload = json.dumps(report.to_dict(), indent=2) + "\n"
    if out is None or out == "-":
        sys.stdout.write(payload)
        sys.stderr.write(report.summary() + "\n")
    else:
        with open(out, "w") as fh:
            fh.write(payload)
        sys.stdout.write(report.summary() + "\n")
    return EXIT_OK


def parse_grid(specs) -> list[tuple[str, list]]:
    """``["filter=norm,none", "f=0,1"]`` -> ``[("filter", ["norm", "none"]), ("f", [0, 1])]``."""
    axes = []
    for spec in specs or ():
        if "=" not in spec:
            raise ConfigError(f"grid axis {spec!r} is not of the form KEY=V1,V2,...")
        key, raw = spec.split("=", 1)
        values = []
        for item in (s for s in raw.split(",") if s.strip()):
            try:
                values.append(json.loads(item))
            except json.JSONDecodeError:
                values.append(item.strip())
        axes.append((key.strip(), values))
    if len(axes) > 2:
        raise ConfigError("a sweep varies at most two fields")
    return axes


def _sweep_cell(doc: dict, assignment: tuple, tol: float) -> tuple[Optional[float], bool, str]:
    try:
        config = from_document(apply_overrides(doc, assignment))
    except ConfigError as exc:
        return None, False, f"invalid: {exc}"
    trace = run(config)
    if trace.diverged:
        return trace.final_error, False, trace.status
    return trace.final_error, trace.final_error < tol, "ok"


def cmd_sweep(doc: dict, axes, tol: float = 1e-2, jobs: int = 1, out: Optional[str] = None) -> int:
    keys = [k for k, _ in axes]
    cells = [] if not axes else list(itertools.product(*(vals for _, vals in axes)))
    assignments = [tuple(zip(keys, cell)) for cell in cells]
    if jobs > 1 and len(assignments) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_cell, [doc] * len(assignments), assignments, [tol] * len(assignments)))
    else:
        results = [_sweep_cell(doc, a, tol) for a in assignments]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(keys + ["final_error", "converged", "status"])
    for cell, (err, ok, status) in zip(cells, results):
        params = [v if isinstance(v, str) else json.dumps(v) for v in cell]
        writer.writerow(params + ["" if err is None else _fmt(err), str(ok).lower(), status])
    _write(buf.getvalue(), out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="byzgd", description="Byzantine fault-tolerant distributed gradient descent simulator."
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON config path or bundled name (e.g. paper_sec10)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config field; dotted keys reach nested fields")
    common.add_argument("--out", default=None, help="output path, '-' for stdout")
    common.add_argument("--seed", type=int, default=None)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="simulate and write the trace CSV")
    sub.add_parser("analyze", parents=[common], help="compute constants and threshold checks")
    sweep = sub.add_parser("sweep", parents=[common], help="final errors over a parameter grid")
    sweep.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2",
                       help="grid axis (at most two)")
    sweep.add_argument("--tol", type=float, default=1e-2, help="final error counted as converged")
    sweep.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "sweep":
            doc = apply_overrides(read_document(args.config), args.overrides)
            if args.seed is not None:
                doc["seed"] = args.seed
            from_document(doc)
            return cmd_sweep(doc, parse_grid(args.grid), args.tol, args.jobs, args.out)
        config = load_config(args.config, args.overrides, args.seed)
        if args.command == "run":
            return cmd_run(config, args.out)
        return cmd_analyze(config, args.out)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except analysis.EnumerationLimitError as exc:
        logger.error("%s", exc)
        return EXIT_INVALID
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
