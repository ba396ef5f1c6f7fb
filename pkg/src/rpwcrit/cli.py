"""Command-line front end.

Every command writes one artifact (CSV or JSON) with a metadata block and
prints a one-line JSON summary. Exit status is 0 on success, 2 for invalid
arguments and 1 for runtime failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .critical_points import DEFAULT_GRID_STEP, MAX_GRID_STEP, NEWTON_TOL, search_critical_points
from .field import sample_field
from .kacrice import series_check, twopoint
from .kacrice.twopoint import TypePair
from .point_process import compare_processes, mc_moments

OUTPUT_DIR_ENV = "RPWCRIT_OUTPUT_DIR"
log = logging.getLogger("rpwcrit")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _positive(name):
    def conv(text):
        v = float(text)
        if not math.isfinite(v) or v <= 0:
            raise argparse.ArgumentTypeError(f"{name} must be a positive number, got {text}")
        return v

    return conv


def _int_at_least(name, lo):
    def conv(text):
        v = int(text)
        if v < lo:
            raise argparse.ArgumentTypeError(f"{name} must be an integer >= {lo}, got {text}")
        return v

    return conv


def _float_list(name):
    def conv(text):
        try:
            vals = [float(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"{name} must be a comma separated list of numbers") from exc
        if not vals or any(not math.isfinite(v) or v <= 0 for v in vals):
            raise argparse.ArgumentTypeError(f"{name} must contain positive numbers")
        return vals

    return conv


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an integer in [0, 2^64)")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", help="output file (default: <command>.<format> in $%s or the cwd)" % OUTPUT_DIR_ENV)
    common.add_argument("--format", choices=("csv", "json"), default=None)
    common.add_argument("--threads", type=_int_at_least("threads", 1), default=1)
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=_seed, required=True)

    p = _Parser(prog="rpwcrit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sample-field", parents=[common, seeded], help="draw one field realisation")
    s.add_argument("--R", type=_positive("R"), required=True, help="certified domain radius")

    s = sub.add_parser("find-critical", parents=[common, seeded], help="critical points in a disc")
    s.add_argument("--rho", type=_positive("rho"), required=True)
    s.add_argument("--R", type=_positive("R"), default=None, help="field domain radius (default rho + 1)")
    s.add_argument("--grid-step", type=_positive("grid-step"), default=DEFAULT_GRID_STEP)
    s.add_argument("--newton-tol", type=_positive("newton-tol"), default=NEWTON_TOL)

    sub.add_parser("k1", parents=[common], help="one-point density")

    for name in ("k2", "k2-typed"):
        s = sub.add_parser(name, parents=[common, seeded], help="two-point function at one separation")
        s.add_argument("--r", type=_positive("r"), required=True)
        s.add_argument("--samples", type=_int_at_least("samples", twopoint.MIN_SAMPLES), default=1_000_000)
        if name == "k2-typed":
            s.add_argument("--pair", choices=[p.value for p in TypePair] + ["every"], default="every")
        else:
            s.add_argument("--spherical", action="store_true", help="also run the spherical cross-check")

    s = sub.add_parser("k2-curve", parents=[common, seeded], help="two-point function on a grid of r")
    s.add_argument("--r-grid", type=_float_list("r-grid"), required=True)
    s.add_argument("--samples", type=_int_at_least("samples", twopoint.MIN_SAMPLES), default=200_000)
    s.add_argument("--typed", action="store_true", help="emit every type pair")

    s = sub.add_parser("moment2", parents=[common, seeded], help="second factorial moment by quadrature")
    s.add_argument("--rho", type=_positive("rho"), required=True)
    s.add_argument("--nodes", type=_int_at_least("nodes", 2), default=64)
    s.add_argument("--samples-per-node", type=_int_at_least("samples-per-node", twopoint.MIN_SAMPLES), default=20_000)

    s = sub.add_parser("mc-moments", parents=[common, seeded], help="count moments from simulated fields")
    s.add_argument("--rho", type=_positive("rho"), required=True)
    s.add_argument("--trials", type=_int_at_least("trials", 500), required=True)
    s.add_argument("--grid-step", type=_positive("grid-step"), default=DEFAULT_GRID_STEP)

    s = sub.add_parser("compare-processes", parents=[common, seeded], help="P(N>=2) for three point processes")
    s.add_argument("--rho-grid", type=_float_list("rho-grid"), required=True)
    s.add_argument("--trials", type=_int_at_least("trials", 500), required=True)
    s.add_argument("--ginibre-matrices", type=_int_at_least("ginibre-matrices", 2), default=50)
    s.add_argument("--ginibre-n", type=_int_at_least("ginibre-n", 64), default=256)

    s = sub.add_parser("verify-series", parents=[common], help="slopes of the small-r expansions")
    s.add_argument("--quantity", choices=list(series_check.QUANTITIES) + ["all"], default="all")
    s.add_argument("--r-grid", type=_float_list("r-grid"), default=None)
    s.add_argument("--as-printed", action="store_true", help="use the coefficients exactly as published")
    return p


# ---------------------------------------------------------------------------
# commands; each returns (summary dict, rows or None, columns or None)


def _cmd_sample_field(a):
    f = sample_field(a.seed, a.R)
    rows = [(int(n), repr(float(c.real)), repr(float(c.imag))) for n, c in zip(f.orders, f.coefficients)]
    summary = {"seed": f.seed, "truncation_order": f.truncation_order, "domain_radius": f.domain_radius}
    return summary, rows, ("n", "re", "im")


def _cmd_find_critical(a):
    R = a.R if a.R is not None else a.rho + 1.0
    if a.grid_step > MAX_GRID_STEP:
        raise UsageError(f"grid-step must be at most 2*pi/8 = {MAX_GRID_STEP:.4f}")
    if a.rho + a.grid_step > R:
        raise UsageError("rho + grid-step must not exceed R")
    res = search_critical_points(sample_field(a.seed, R), a.rho, a.grid_step, a.newton_tol)
    rows = [
        (repr(p.location[0]), repr(p.location[1]), repr(p.value), p.kind.value, repr(p.det_hessian), repr(p.trace_hessian))
        for p in res.points
    ]
    summary = {
        "count": res.count(),
        "min": sum(p.kind.value == "min" for p in res.points),
        "max": sum(p.kind.value == "max" for p in res.points),
        "saddle": sum(p.kind.value == "saddle" for p in res.points),
        "unconverged_cells": res.unconverged,
    }
    return summary, rows, ("x", "y", "value", "kind", "det_hessian", "trace_hessian")


def _cmd_k1(a):
    k1 = twopoint.k1_density()
    summary = {"k1": k1, "expected_count_rho1": twopoint.expected_count(1.0)}
    return summary, [(repr(k1),)], ("k1",)


def _k2_row(e):
    return (repr(e.r), repr(e.value), repr(e.std_error), e.samples, TypePair(e.type_pair).value)


K2_COLUMNS = ("r", "k2", "se", "samples", "type_pair")


def _cmd_k2(a):
    e = twopoint.k2(a.r, a.samples, a.seed, a.threads)
    summary = {"r": e.r, "k2": e.value, "se": e.std_error, "samples": e.samples}
    rows = [_k2_row(e)]
    if a.spherical:
        s = twopoint.k2_spherical_crosscheck(a.r, a.samples, a.seed, a.threads)
        summary.update({"k2_spherical": s.value, "se_spherical": s.std_error})
        rows.append((repr(s.r), repr(s.value), repr(s.std_error), s.samples, "All-spherical"))
    return summary, rows, K2_COLUMNS


def _cmd_k2_typed(a):
    t = twopoint.k2_all_types(a.r, a.samples, a.seed, a.threads)
    pairs = list(TypePair) if a.pair == "every" else [TypePair(a.pair)]
    rows = [_k2_row(t[p]) for p in pairs]
    summary = {"r": t.r, "samples": t.samples, "partition_residual": t.partition_residual}
    for p in pairs:
        summary[p.value] = t[p].value
        summary[p.value + "_se"] = t[p].std_error
    return summary, rows, K2_COLUMNS


def _cmd_k2_curve(a):
    rows = []
    for r in a.r_grid:
        if a.typed:
            t = twopoint.k2_all_types(r, a.samples, a.seed, a.threads)
            rows.extend(_k2_row(t[p]) for p in TypePair)
        else:
            rows.append(_k2_row(twopoint.k2(r, a.samples, a.seed, a.threads)))
    return {"points": len(rows), "r_min": min(a.r_grid), "r_max": max(a.r_grid)}, rows, K2_COLUMNS


def _cmd_moment2(a):
    m = twopoint.second_factorial_moment(a.rho, a.nodes, a.samples_per_node, a.seed, threads=a.threads)
    lead = twopoint.leading_factorial_moment(a.rho)
    summary = {"rho": a.rho, "second_factorial": m.value, "se": m.std_error, "leading_term": lead, "nodes": m.nodes}
    return summary, [(repr(a.rho), repr(m.value), repr(m.std_error), repr(lead))], ("rho", "second_factorial", "se", "leading_term")


def _cmd_mc_moments(a):
    m = mc_moments(a.rho, a.trials, a.seed, a.grid_step, a.threads)
    summary = m.summary()
    rows = [(k, repr(float(v))) for k, v in summary.items()]
    return summary, rows, ("statistic", "value")


def _cmd_compare(a):
    if any(r > 1 for r in a.rho_grid):
        raise UsageError("rho-grid values must lie in (0, 1]")
    rows_ = compare_processes(a.rho_grid, a.trials, a.seed, a.ginibre_matrices, a.ginibre_n, a.threads)
    rows = [(repr(r.rho), r.process, repr(r.p_ge2), repr(r.se)) for r in rows_]
    summary = {f"{r.process}@{r.rho}": r.p_ge2 for r in rows_}
    return summary, rows, ("rho", "process", "p_ge2", "se")


def _cmd_verify(a):
    if a.r_grid is not None and any(r > 0.3 for r in a.r_grid):
        raise UsageError("r-grid values must lie in (0, 0.3]")
    qs = series_check.QUANTITIES if a.quantity == "all" else (a.quantity,)
    rows, ok = [], True
    for q in qs:
        rep = series_check.verify_series(q, a.r_grid, a.as_printed)
        ok &= rep.all_passed
        for c in rep.checks:
            rows.append((q, c.name, repr(c.expected_slope), repr(round(c.measured_slope, 6)), c.mode, str(c.passed).lower(), c.note))
    summary = {"checks": len(rows), "all_passed": bool(ok)}
    return summary, rows, ("quantity", "name", "expected_slope", "measured_slope", "mode", "passed", "note")


COMMANDS = {
    "sample-field": (_cmd_sample_field, "csv"),
    "find-critical": (_cmd_find_critical, "csv"),
    "k1": (_cmd_k1, "json"),
    "k2": (_cmd_k2, "json"),
    "k2-typed": (_cmd_k2_typed, "csv"),
    "k2-curve": (_cmd_k2_curve, "csv"),
    "moment2": (_cmd_moment2, "json"),
    "mc-moments": (_cmd_mc_moments, "json"),
    "compare-processes": (_cmd_compare, "csv"),
    "verify-series": (_cmd_verify, "csv"),
}

_NOT_PARAMS = {"command", "output", "format", "threads", "verbose"}


def _metadata(a) -> dict:
    params = {k: v for k, v in sorted(vars(a).items()) if k not in _NOT_PARAMS and k != "seed"}
    return {"command": a.command, "version": __version__, "seed": getattr(a, "seed", None), "params": params}


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"not serialisable: {type(x)}")


def render(meta, summary, rows, columns, fmt) -> str:
    if fmt == "json":
        body = {"metadata": meta, "summary": summary}
        if rows is not None and columns is not None:
            body["rows"] = [dict(zip(columns, r)) for r in rows]
        return json.dumps(body, sort_keys=True, indent=2, default=_jsonable) + "\n"
    buf = io.StringIO()
    buf.write(f"# command: {meta['command']}\n")
    buf.write(f"# version: {meta['version']}\n")
    buf.write(f"# seed: {meta['seed']}\n")
    buf.write(f"# params: {json.dumps(meta['params'], sort_keys=True, default=_jsonable)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _output_path(a, fmt) -> Path:
    if a.output:
        return Path(a.output)
    base = Path(os.environ.get(OUTPUT_DIR_ENV) or ".")
    return base / f"{a.command}.{fmt}"


def run(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(f"rpwcrit: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    func, default_fmt = COMMANDS[a.command]
    fmt = a.format or default_fmt
    try:
        summary, rows, columns = func(a)
    except (UsageError, ValueError) as exc:
        print(f"rpwcrit: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report any runtime failure
        print(f"rpwcrit: runtime failure: {exc!r}", file=sys.stderr)
        return 1
    path = _output_path(a, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render(_metadata(a), summary, rows, columns, fmt))
    except OSError as exc:
        print(f"rpwcrit: cannot write {path}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True, default=_jsonable))
    return 0


def main() -> None:
    sys.exit(run())
