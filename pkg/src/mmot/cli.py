"""Command-line front end.

Exit codes: 0 success, 1 domain or assertion failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .certify import hyperplane_certificate
from .constructors import (
    anti_monotone_plan,
    binned_uniform_l1,
    fat_plan,
    fractal_plan,
    gamma0,
    gamma1,
    reflection_plan,
)
from .costs import CostSpec
from .errors import MMOTError, InvalidInput, Unconverged
from .experiments import monge_gap, reproduce_counterexample
from .measures import build_counterexample_measure, build_counterexample_parts, discretize_uniform_box
from .plans import marginal
from .serialize import (
    certificate_to_dict,
    measure_from_dict,
    measure_to_dict,
    plan_from_dict,
    plan_to_csv,
    plan_to_dict,
    read_json,
    report_to_dict,
    validate,
    write_json,
)
from .solvers import monge_search, solve_lp, solve_sinkhorn

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # bad parameters are a domain failure; exit 2 is reserved for I/O
        self.print_usage(sys.stderr)
        self.exit(EXIT_DOMAIN, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _box(text: str) -> list:
    """``"0,1x0,2"`` -> ``[(0, 1), (0, 2)]``."""
    try:
        return [tuple(float(v) for v in side.split(",")) for side in text.split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad box {text!r}; expected lo,hi[xlo,hi...]") from None


def _emit(doc, out):
    if out is None:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True, allow_nan=False)
        sys.stdout.write("\n")
    else:
        write_json(out, doc)


def _emit_plan(plan, out, fmt):
    if fmt == "csv":
        if out is None:
            plan_to_csv(plan, sys.stdout)
        else:
            with open(out, "w", newline="", encoding="utf-8") as fh:
                plan_to_csv(plan, fh)
    else:
        _emit(plan_to_dict(plan), out)


def _load_measures(paths):
    return [measure_from_dict(read_json(p)) for p in paths]


# -- subcommands ------------------------------------------------------------------


def cmd_gen(args) -> int:
    out = Path(args.out or ".")
    if not out.is_dir():
        raise FileNotFoundError(f"output directory {out} does not exist")
    if args.preset == "counterexample":
        files = {f"counterexample_d{args.d}_n{args.n}.json": build_counterexample_measure(args.d, args.n)}
    elif args.preset == "counterexample-parts":
        parts = build_counterexample_parts(args.d, args.n)
        files = {f"mu_{b}_d{args.d}_n{args.n}.json": m for b, m in zip("CRL", parts)}
    else:
        box = args.box or [(0.0, 1.0)] * args.d
        if len(box) != args.d:
            raise InvalidInput(f"--box has {len(box)} sides but --d is {args.d}")
        files = {f"uniform_box_d{args.d}_n{args.n}.json": discretize_uniform_box(box, args.n)}
    for name, mu in files.items():
        doc = measure_to_dict(mu)
        validate(doc, "measure")
        write_json(out / name, doc)
        print(out / name)
    return EXIT_OK


def _constructed(args):
    """Build the requested plan; returns (plan, diagnostics)."""
    diag = {}
    if args.name == "gamma0":
        plan = gamma0(args.d, args.n)
    elif args.name == "gamma1":
        plan = gamma1(args.d, args.n)
    elif args.name == "anti-monotone":
        if not args.measures or len(args.measures) != 2:
            raise InvalidInput("anti-monotone needs --measures A.json B.json")
        plan = anti_monotone_plan(*_load_measures(args.measures))
    elif args.name == "reflection":
        if not args.measures or len(args.measures) != 1:
            raise InvalidInput("reflection needs --measures MU.json")
        plan = reflection_plan(_load_measures(args.measures)[0], args.N)
    elif args.name == "fractal":
        res = fractal_plan(args.N, args.d, args.samples, args.K)
        plan = res.plan
        diag = {"max_deviation": res.max_deviation, "bound": res.bound, "within_bound": res.max_deviation <= res.bound}
    else:
        plan = fat_plan(args.m)
        diag = {"marginal_l1": [binned_uniform_l1(marginal(plan, j)) for j in range(1, plan.N + 1)]}
    diag["atoms"] = len(plan)
    return plan, diag


def cmd_construct(args) -> int:
    plan, diag = _constructed(args)
    cert = certificate_to_dict(hyperplane_certificate(plan, args.tol))
    if args.out is None and args.format == "json":
        _emit({"plan": plan_to_dict(plan), "certificate": cert, "diagnostics": diag}, None)
        return EXIT_OK
    _emit_plan(plan, args.out, args.format)
    if args.out is not None:
        write_json(Path(args.out).with_suffix(".certificate.json"), cert)
    json.dump({"certificate": cert, "diagnostics": diag}, sys.stderr if args.out is None else sys.stdout, indent=2)
    print(file=sys.stderr if args.out is None else sys.stdout)
    return EXIT_OK


def cmd_solve(args) -> int:
    measures = _load_measures(args.measures)
    if len(measures) == 1 and args.N > 1:
        measures = measures * args.N
    spec = CostSpec(args.cost, len(measures), measures[0].dim)
    status = EXIT_OK
    if args.method == "lp":
        report = solve_lp(measures, spec)
    elif args.method == "sinkhorn":
        try:
            report = solve_sinkhorn(measures, spec, args.epsilon, max_iter=args.max_iter, tol=args.tol)
        except Unconverged as exc:
            print(f"warning: {exc}", file=sys.stderr)
            report, status = exc.report, EXIT_DOMAIN
    else:
        if len(args.measures) != 1:
            raise InvalidInput("Monge search takes a single measure (--measures MU.json) and --N")
        report = monge_search(measures[0], spec, mode=args.mode, seed=args.seed)
    if args.format == "csv":
        _emit_plan(report.plan, args.out, "csv")
    else:
        doc = report_to_dict(report)
        validate(doc, "solve_report")
        _emit(doc, args.out)
    return status


def cmd_certify(args) -> int:
    path = Path(args.plan)
    plan = plan_from_dict(read_json(path), base_dir=path.parent)
    doc = certificate_to_dict(hyperplane_certificate(plan, args.tol))
    validate(doc, "certificate")
    _emit(doc, args.out)
    return EXIT_OK


def _report_exit(report, out) -> int:
    _emit(report, out)
    for msg in report["failures"]:
        print(f"FAIL: {msg}", file=sys.stderr)
    return EXIT_OK if report["ok"] else EXIT_DOMAIN


def cmd_reproduce(args) -> int:
    report = reproduce_counterexample(args.d, args.n_list, args.tol)
    return _report_exit(report, args.out)


def cmd_gap(args) -> int:
    report = monge_gap(args.m_list, args.mode, args.seed, args.d)
    return _report_exit(report, args.out)


# -- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmot", description="Multi-marginal optimal transport with harmonic costs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="write measure JSON files")
    g.add_argument("--preset", required=True, choices=["counterexample", "counterexample-parts", "uniform-box"])
    g.add_argument("--d", type=int, default=1)
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--box", type=_box, help="lo,hi per axis joined by 'x', e.g. 0,1x0,1 (use --box=-1,1 for negatives)")
    g.add_argument("--out", help="output directory (default: current)")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("construct", help="build an explicit plan and certify it")
    c.add_argument("name", choices=["gamma0", "gamma1", "anti-monotone", "fractal", "reflection", "fat"])
    c.add_argument("--d", type=int, default=1)
    c.add_argument("--n", type=int, default=1)
    c.add_argument("--N", type=int, default=3)
    c.add_argument("--K", type=int, default=8)
    c.add_argument("--samples", type=int, default=81, help="grid points per axis for the fractal plan")
    c.add_argument("--m", type=int, default=100, help="quadrature resolution for the fat plan")
    c.add_argument("--measures", nargs="+", help="measure JSON files for anti-monotone / reflection")
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--format", choices=["json", "csv"], default="json")
    c.add_argument("--out")
    c.set_defaults(func=cmd_construct)

    s = sub.add_parser("solve", help="solve the Kantorovich problem or search Monge maps")
    s.add_argument("--measures", nargs="+", required=True)
    s.add_argument("--N", type=int, default=1, help="repeat a single measure N times")
    s.add_argument("--cost", choices=["attractive", "repulsive", "sum-square"], default="repulsive")
    s.add_argument("--method", choices=["lp", "sinkhorn", "monge"], default="lp")
    s.add_argument("--epsilon", type=float, default=0.1)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--max-iter", type=int, default=10_000)
    s.add_argument("--mode", choices=["exhaustive", "local", "assignment"], default="exhaustive")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=["json", "csv"], default="json")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    k = sub.add_parser("certify", help="hyperplane certificate of a plan file")
    k.add_argument("--plan", required=True)
    k.add_argument("--tol", type=float, default=None)
    k.add_argument("--out")
    k.set_defaults(func=cmd_certify)

    r = sub.add_parser("reproduce", help="counterexample reproduction experiment")
    r.add_argument("--d", type=int, default=1)
    r.add_argument("--n-list", type=_int_list, default=[1, 2, 4])
    r.add_argument("--tol", type=float, default=1e-9)
    r.add_argument("--out")
    r.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("gap", help="Monge versus Kantorovich gap on equal-mass atoms")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--m-list", type=_int_list, default=[6])
    p.add_argument("--mode", choices=["exhaustive", "local", "assignment"], default="exhaustive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gap)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except MMOTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
