"""Command-line front end.

Exit codes: 0 success (or an Interior point for ``classify``), 2 Kummer
surface (``classify`` only), 3 pricing undefined, 64 usage or config error,
1 internal failure or a failed validation.
"""

import argparse
import json
import sys
from dataclasses import replace

from . import __version__, _debug
from .config import SCHEMA_VERSION, load_config, request_to_dict
from .errors import ConfigError, DomainError, PricingUndefinedError
from .geometry import BRANCHES, CorrelationPoint, Region, classify, n_assets_for
from .output import eigen_grid_csv, fmt, read_csv, surface_csv
from .pricing import MonteCarlo, Quadrature, price

EXIT_OK, EXIT_FAIL, EXIT_KUMMER, EXIT_UNDEFINED, EXIT_USAGE = 0, 1, 2, 3, 64


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_to_json(text):
    meta, header, rows = read_csv(text)
    body = [
        {k: (v if k == "branch" else float(v)) for k, v in zip(header, r)} for r in rows
    ]
    return json.dumps({"metadata": meta, "columns": header, "rows": body}, indent=1) + "\n"


# -- classify -----------------------------------------------------------------


def cmd_classify(args):
    try:
        n_assets_for(len(args.correlations))
        point = CorrelationPoint.of(*args.correlations)
        c = classify(point, args.eps_rank)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    report = {
        "verdict": c.verdict.value,
        "determinant": c.determinant,
        "eigenvalues": list(c.eigenvalues),
        "rank": c.rank,
        "null_count": c.null_count,
        "eps_rank": c.tolerance_used,
    }
    if args.format == "json":
        text = json.dumps(report, indent=2) + "\n"
    else:
        text = "".join([
            f"verdict: {c.verdict.value}\n",
            f"determinant: {fmt(c.determinant)}\n",
            "eigenvalues: " + " ".join(fmt(v) for v in c.eigenvalues) + "\n",
            f"rank: {c.rank}\n",
            f"eps_rank: {fmt(c.tolerance_used)}\n",
        ])
    _write(text, args.out)
    return {Region.INTERIOR: EXIT_OK, Region.KUMMER_SURFACE: EXIT_KUMMER,
            Region.INDEFINITE: EXIT_UNDEFINED}[c.verdict]


# -- surface / eigen-grid -------------------------------------------------------


def cmd_surface(args):
    try:
        text = surface_csv(args.level, args.resolution)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    _write(_csv_to_json(text) if args.format == "json" else text, args.out)
    return EXIT_OK


def cmd_eigen_grid(args):
    if args.resolution < 2:
        raise UsageError("resolution must be at least 2")
    text = eigen_grid_csv(args.branch, args.resolution)
    _write(_csv_to_json(text) if args.format == "json" else text, args.out)
    return EXIT_OK


# -- price ------------------------------------------------------------------------


def _apply_overrides(cfg, args):
    req = cfg.request
    if args.paths is not None and args.quad_order is not None:
        raise UsageError("--paths selects Monte Carlo and --quad-order quadrature; give one")
    method = req.method
    if args.paths is not None:
        seed = args.seed if args.seed is not None else getattr(method, "seed", 0)
        method = MonteCarlo(args.paths, seed, getattr(method, "workers", 1))
    elif args.quad_order is not None:
        method = Quadrature(args.quad_order)
    elif args.seed is not None:
        if not isinstance(method, MonteCarlo):
            raise UsageError("--seed only applies to Monte Carlo pricing")
        method = replace(method, seed=args.seed)
    if isinstance(method, MonteCarlo) and method.paths < 1000:
        raise UsageError("Monte Carlo needs at least 1000 paths")
    if isinstance(method, Quadrature) and method.order < 3:
        raise UsageError("quadrature order must be at least 3")
    eps = args.eps_rank if args.eps_rank is not None else req.eps_rank
    req = replace(req, method=method, eps_rank=eps)
    out = args.out if args.out is not None else cfg.output_path
    fmt_ = args.format if args.format is not None else cfg.output_format
    return req, out, fmt_


def _result_document(req, res):
    return {
        "schema_version": SCHEMA_VERSION,
        "value": res.value,
        "std_error": res.std_error,
        "method": res.method_used,
        "region": res.region.verdict.value,
        "rank": res.region.rank,
        "determinant": res.region.determinant,
        "diagnostics": res.diagnostics,
        "request": request_to_dict(req),
    }


def cmd_price(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    req, out, out_format = _apply_overrides(cfg, args)
    try:
        res = price(req)
    except PricingUndefinedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDEFINED
    except (ConfigError, DomainError) as exc:
        raise UsageError(str(exc)) from None
    lines = [f"value: {fmt(res.value)}"]
    if res.std_error is not None:
        lines.append(f"std_error: {fmt(res.std_error)}")
    lines.append(f"method: {res.method_used}")
    lines.append(f"region: {res.region.verdict.value} (rank {res.region.rank}, "
                 f"det {fmt(res.region.determinant)})")
    for k, v in res.diagnostics.items():
        lines.append(f"{k}: {v}")
    print("\n".join(lines))
    if out is not None:
        doc = _result_document(req, res)
        if out_format == "csv":
            keys = ["value", "std_error", "method", "region", "rank", "determinant"]
            vals = [fmt(doc[k]) if isinstance(doc[k], float) else ("" if doc[k] is None else str(doc[k]))
                    for k in keys]
            text = f"# schema_version: {SCHEMA_VERSION}\n# command: price\n" + ",".join(keys) + "\n" + ",".join(vals) + "\n"
        else:
            text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        _write(text, out)
    return EXIT_OK


# -- validate ---------------------------------------------------------------------


def cmd_validate(args):
    from .validation import dumps, failed_invariants, run_suite

    summary = run_suite(args.suite, args.seed if args.seed is not None else 0, tuple(args.fault))
    _write(dumps(summary) + "\n", args.out)
    for rec in summary["criteria"]:
        status = "PASS" if rec["passed"] else "FAIL"
        print(f"[{status}] criterion {rec['id']}: {rec['name']}", file=sys.stderr)
    for name in failed_invariants(summary):
        print(f"failed invariant: {name}", file=sys.stderr)
    return EXIT_OK if summary["passed"] else EXIT_FAIL


# -----------------------------------------------------------------------------------


def build_parser():
    p = ArgumentParser(prog="kummerbs", description="Correlation geometry and multi-asset pricing.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    c = sub.add_parser("classify", help="classify a correlation point")
    c.add_argument("correlations", nargs="+", type=float, help="rho_12 rho_13 ... rho_(N-1)N")
    c.add_argument("--eps-rank", type=float, default=None)
    c.add_argument("--format", choices=("text", "json"), default="text")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("surface", help="sample the level set det rho = C (three assets)")
    s.add_argument("level", type=float, help="determinant level C in [-3, 1)")
    s.add_argument("--resolution", type=int, default=64)
    s.add_argument("--out", default=None)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_surface)

    e = sub.add_parser("eigen-grid", help="nonzero eigenvalues along a Kummer sheet")
    e.add_argument("branch", choices=BRANCHES)
    e.add_argument("--resolution", type=int, default=101)
    e.add_argument("--out", default=None)
    e.add_argument("--format", choices=("csv", "json"), default="csv")
    e.set_defaults(func=cmd_eigen_grid)

    r = sub.add_parser("price", help="price a European payoff from a JSON config")
    r.add_argument("config")
    r.add_argument("--out", default=None)
    r.add_argument("--format", choices=("csv", "json"), default=None)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--paths", type=int, default=None)
    r.add_argument("--quad-order", type=int, default=None)
    r.add_argument("--eps-rank", type=float, default=None)
    r.set_defaults(func=cmd_price)

    v = sub.add_parser("validate", help="run acceptance suites")
    v.add_argument("suite", choices=("geometry", "kernels", "pricing", "all"))
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--fault", action="append", default=[], choices=sorted(_debug.KNOWN_FAULTS),
                   help="inject a fault to self-test the harness")
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"kummerbs {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # anything else is a bug or a numerical breakdown
        print(f"kummerbs {args.command}: internal error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
