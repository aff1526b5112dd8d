"""Command-line interface: ``relaxrk solve|converge|ap-compare|tableau``.

Exit status is 0 on success, 1 on a numerical failure and 2 on invalid
usage (unknown names, malformed options).
"""

from __future__ import annotations

import argparse
import sys

from . import harness
from .errors import NumericalError, TableauError, UnsupportedError
from .models import IC_NAMES, MODEL_NAMES
from .tableau import (
    SCHEME_NAMES,
    ap_classify,
    builtin_scheme,
    count_coupling_conditions,
    is_l_stable,
    is_stiffly_accurate,
    read_tableau_file,
    verify_order,
)
from .trees import REDUCTIONS

EXIT_OK, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _param(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key!r} needs a number, got {value!r}") from None


def _n_list(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_options(p, need_out=False):
    p.add_argument("--config", help="key = value file; command-line options take precedence")
    p.add_argument("--model", help=f"one of {', '.join(MODEL_NAMES)} (inferred from --ic)")
    p.add_argument("--ic", help=f"one of {', '.join(IC_NAMES)}")
    p.add_argument("--scheme", help=f"one of {', '.join(SCHEME_NAMES)}")
    p.add_argument("--n", type=int)
    p.add_argument("--cfl", type=float, help="dt/dx")
    p.add_argument("--eps", type=float, dest="epsilon")
    p.add_argument("--tend", type=float, dest="t_end")
    p.add_argument("--order", type=int, choices=(1, 2, 5), dest="spatial_order")
    p.add_argument("--disc", choices=("fd", "fv"), dest="discretization")
    p.add_argument("--az", type=float, dest="a_z", help="initial offset of z (broadwell-smooth)")
    p.add_argument("--param", type=_param, action="append", default=[],
                   help="model parameter override, e.g. g_grav=9.81 (repeatable)")
    p.add_argument("--project-output", action="store_true", default=None,
                   help="relax recorded states with one extra stage solve")
    p.add_argument("--max-courant", type=float, help="shorten dt to keep dt*speed/dx below this")
    p.add_argument("--out", required=need_out, help="output path")


def build_parser():
    parser = argparse.ArgumentParser(prog="relaxrk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="run one configuration and write CSV + manifest")
    _add_run_options(p, need_out=True)

    p = sub.add_parser("converge", help="self-convergence table")
    _add_run_options(p)
    p.add_argument("--n-list", type=_n_list, default=(50, 100, 200, 400))
    p.add_argument("--norm", choices=harness.NORMS)
    p.add_argument("--component", type=int)
    p.add_argument("--reference-factor", type=int, default=4)

    p = sub.add_parser("ap-compare", help="full system versus limit-system run")
    _add_run_options(p)
    p.add_argument("--alpha-mode", choices=("relaxation", "limit"), default="relaxation")

    p = sub.add_parser("tableau", help="inspect IMEX tableaux")
    tsub = p.add_subparsers(dest="tcommand", required=True)
    tsub.add_parser("list", help="list built-in schemes")
    v = tsub.add_parser("verify", help="check order conditions and stability properties")
    v.add_argument("name", nargs="?", help="built-in scheme name")
    v.add_argument("--file", help="tableau text file (explicit, then '---', then implicit)")
    v.add_argument("--order", type=int, help="order to verify (default: declared)")
    c = tsub.add_parser("count-coupling", help="number of coupling conditions")
    c.add_argument("--p", type=int, required=True)
    c.add_argument("--reduction", default="general",
                   help=f"one of {', '.join(REDUCTIONS)} (or w, c)")
    return parser


def _spec(args):
    values = harness.read_config(args.config) if args.config else {}
    spec = harness.spec_from_mapping(values)
    overrides = {}
    for key in ("model", "ic", "scheme", "n", "cfl", "epsilon", "t_end", "spatial_order",
                "discretization", "a_z", "out", "project_output", "max_courant",
                "n_list", "norm", "component"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    params = dict(spec.params)
    params.update(dict(args.param))
    for key, value in overrides.items():
        setattr(spec, key, value)
    spec.params = params
    try:
        spec.validate()
    except (KeyError, ValueError) as exc:
        raise UsageError(exc.args[0] if exc.args else str(exc)) from None
    return spec


def _cmd_solve(args, out):
    spec = _spec(args)
    res = harness.run_experiment(spec)
    print(f"wrote {res.paths[0]} ({len(res.x)} rows, {res.step_count} steps)", file=out)


def _cmd_converge(args, out):
    spec = _spec(args)
    table = harness.convergence_study(spec, args.reference_factor)
    print(table.format(), file=out)
    if spec.out:
        with open(spec.out, "w", newline="\n") as fh:
            fh.write(table.to_csv())


def _cmd_ap(args, out):
    spec = _spec(args)
    report = harness.ap_compare(spec, args.alpha_mode)
    print(report.format(), file=out)


def _cmd_tableau(args, out):
    if args.tcommand == "list":
        for name in SCHEME_NAMES:
            t = builtin_scheme(name)
            print(f"{name}  order {t.declared_order}  stages {t.nu}  {ap_classify(t)}", file=out)
        return
    if args.tcommand == "count-coupling":
        print(count_coupling_conditions(args.p, args.reduction), file=out)
        return
    if (args.name is None) == (args.file is None):
        raise UsageError("give either a scheme name or --file")
    t = read_tableau_file(args.file, args.order) if args.file else builtin_scheme(args.name)
    p = args.order or t.declared_order
    if p is None:
        raise UsageError("--order is required for tableau files without a declared order")
    report = verify_order(t, p)
    print(report.format(), file=out)
    print(f"AP class: {ap_classify(t)}", file=out)
    try:
        print(f"L-stable: {is_l_stable(t.implicit)}", file=out)
    except TableauError as exc:
        print(f"L-stable: n/a ({exc})", file=out)
    print(f"stiffly accurate: {is_stiffly_accurate(t.implicit)}", file=out)
    if not report.max_order_satisfied >= p:
        raise NumericalError(f"order conditions of order {p} not satisfied")


COMMANDS = {"solve": _cmd_solve, "converge": _cmd_converge, "ap-compare": _cmd_ap, "tableau": _cmd_tableau}


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        COMMANDS[args.command](args, out)
    except (UsageError, KeyError, UnsupportedError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        print(f"relaxrk: error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"relaxrk: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError) as exc:
        print(f"relaxrk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
