"""ncck command line: kernels, orthogonal systems, state verification,
level-set sampling, and tracial relaxation export.

Exit codes: 0 success, 1 domain error (bad law, missing moment, rejection
failure), 2 usage error. File outputs are written atomically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from fractions import Fraction

from ncck.gram import gram_schmidt
from ncck.kernel import LevelSetSpec, cd_kernel, cd_kernel_free_product
from ncck.poly import NcPolynomial, PolyParseError, parse_poly
from ncck.sampling import (
    CSV_HEADER,
    FigureConfig,
    RejectionError,
    SamplerConfig,
    rejection_sample,
    reports_to_csv,
    run_figure,
)
from ncck.sdp import build_relaxation, check_feasibility, export_sdpa, write_sdpa
from ncck.states import (
    MomentError,
    TracialState,
    free_poisson_state,
    load_moment_table,
    semicircle_state,
    verify_state,
)
from ncck.words import Word, enumerate_words


class DomainError(RuntimeError):
    pass


def _fraction(text: str) -> Fraction:
    return Fraction(text)


def make_state(args, d_needed: int) -> TracialState:
    if args.law == "semicircle":
        return semicircle_state(_fraction(args.variance), args.vars)
    if args.law == "poisson":
        if args.c is None:
            raise DomainError("--law poisson requires --c")
        return free_poisson_state(_fraction(args.c), args.vars)
    if args.law == "table":
        if not args.moments:
            raise DomainError("--law table requires --moments FILE")
        try:
            text = open(args.moments).read()
        except OSError as exc:
            raise DomainError(f"cannot read moment table: {exc}") from exc
        return load_moment_table(text, args.vars, d_needed)
    raise DomainError(f"unknown law {args.law!r}")


def make_kernel(args, state: TracialState, d: int):
    if args.vars > 1 and args.law in ("semicircle", "poisson"):
        return cd_kernel_free_product(state, d)
    return cd_kernel(state, d)


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, text: str) -> None:
    if getattr(args, "out", None):
        _write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _format_value(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_moments(args) -> None:
    state = make_state(args, -(-args.degree // 2))
    words = enumerate_words(args.vars, args.degree)
    rows = [(w.text(), state.moment(w)) for w in words]
    if args.format == "json":
        _emit(args, json.dumps({w: _format_value(v) for w, v in rows}, indent=2) + "\n")
    elif args.format == "csv":
        _emit(args, "word,value\n" + "".join(
            f"{w},{_format_value(v)}\n" for w, v in rows))
    else:
        _emit(args, "".join(f"{w} = {_format_value(v)}\n" for w, v in rows))


def cmd_ortho(args) -> None:
    state = make_state(args, args.degree)
    basis = gram_schmidt(state, args.degree)
    lines = []
    for w in basis.words:
        if args.orthonormal:
            poly = basis.orthonormal_poly(w)
            lines.append(f"P[{w.text()}] = {poly.text()}")
        else:
            lines.append(f"Q[{w.text()}] = {basis.polys[w].text()}  "
                         f"nu = {_format_value(basis.norms[w])}")
    for w in basis.dropped:
        lines.append(f"dropped: {w.text()}")
    _emit(args, "\n".join(lines) + "\n")


def cmd_kernel(args) -> None:
    state = make_state(args, args.degree)
    kernel = make_kernel(args, state, args.degree)
    diag = kernel.diagonal_polynomial()
    if args.format == "csv":
        rows = ["word,coefficient"]
        for w in diag.words():
            rows.append(f"{w.text()},{_format_value(Fraction(diag.terms[w]))}")
        _emit(args, "\n".join(rows) + "\n")
    else:
        _emit(args, diag.text() + "\n")


def cmd_verify(args) -> None:
    state = make_state(args, args.degree)
    report = verify_state(state, args.degree, exact=args.exact)
    _emit(args, json.dumps(report.to_dict(), indent=2) + "\n")
    if not report.ok():
        raise DomainError("state verification failed: " + "; ".join(report.failures))


def cmd_sample(args) -> None:
    state = make_state(args, args.degree)
    kernel = make_kernel(args, state, args.degree)
    try:
        f = parse_poly(args.observable, n=args.vars)
    except PolyParseError as exc:
        raise DomainError(f"bad observable: {exc}") from exc
    if args.law == "poisson":
        sampler = SamplerConfig(law="wishart", k=args.k, c=float(args.c),
                                seed=args.seed, workers=args.workers)
    else:
        sampler = SamplerConfig(law="goe", k=args.k, sigma=args.sigma,
                                seed=args.seed, workers=args.workers,
                                convention=args.convention)
    spec = LevelSetSpec(target=args.vars, epsilon=args.epsilon,
                        k=args.k, d=args.degree)
    report = rejection_sample(kernel, spec, sampler, args.samples, f)
    _emit(args, CSV_HEADER + "\n" + report.csv_row() + "\n")


def cmd_figure(args) -> None:
    try:
        text = open(args.config).read()
    except OSError as exc:
        raise DomainError(f"cannot read config: {exc}") from exc
    config = FigureConfig.parse(text)
    if args.workers is not None:
        config.workers = args.workers
    reports = run_figure(config)
    _emit(args, reports_to_csv(reports))


def _read_constraints(path: str | None, n: int) -> list[NcPolynomial]:
    if not path:
        return []
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise DomainError(f"cannot read constraints: {exc}") from exc
    out = []
    for line in lines:
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(parse_poly(line, n=n))
    return out


def cmd_sdp_export(args) -> None:
    try:
        f = parse_poly(args.objective, n=args.vars)
    except PolyParseError as exc:
        raise DomainError(f"bad objective: {exc}") from exc
    constraints = _read_constraints(args.constraints, args.vars)
    problem = build_relaxation(f, constraints, args.degree, n=args.vars)
    if args.out:
        write_sdpa(problem, args.out)
    else:
        sys.stdout.write(export_sdpa(problem))


def cmd_sdp_check(args) -> None:
    try:
        f = parse_poly(args.objective, n=args.vars)
    except PolyParseError as exc:
        raise DomainError(f"bad objective: {exc}") from exc
    constraints = _read_constraints(args.constraints, args.vars)
    problem = build_relaxation(f, constraints, args.degree, n=args.vars)
    state = make_state(args, args.degree)
    report = check_feasibility(problem, state, tol=args.tol)
    _emit(args, json.dumps(report.to_dict(), indent=2) + "\n")
    if not report.feasible:
        raise DomainError("state is infeasible for the relaxation")


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def _add_law_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--law", required=True,
                   choices=["semicircle", "poisson", "table"],
                   help="moment law: semicircle, poisson, or a moment table")
    p.add_argument("--vars", type=int, default=1,
                   help="number of variables (multi-variable laws are free products)")
    p.add_argument("--variance", default="1",
                   help="semicircle variance (rational, default 1)")
    p.add_argument("--c", default=None, help="free Poisson rate (rational)")
    p.add_argument("--moments", default=None,
                   help="moment table CSV for --law table")


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="write output to a file (atomic)")
    p.add_argument("--format", default="text", choices=["text", "csv", "json"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncck",
        description="noncommutative Christoffel-Darboux kernels and "
                    "tracial moment relaxations")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="print moments of a law")
    _add_law_flags(p)
    p.add_argument("--degree", type=int, required=True,
                   help="maximum word length")
    _add_output_flags(p)
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("ortho", help="print the monic orthogonal system")
    _add_law_flags(p)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--orthonormal", action="store_true",
                   help="print floating orthonormal polynomials instead")
    _add_output_flags(p)
    p.set_defaults(func=cmd_ortho)

    p = sub.add_parser("kernel", help="print the diagonal kernel polynomial")
    _add_law_flags(p)
    p.add_argument("--degree", type=int, required=True)
    _add_output_flags(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("verify", help="verify PSD/traciality of a state")
    _add_law_flags(p)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--exact", action="store_true",
                   help="also run the exact rational PSD test")
    _add_output_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample", help="rejection-sample the level-set band")
    _add_law_flags(p)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--k", type=int, required=True, help="matrix size")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--observable", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int,
                   default=int(os.environ.get("NCCK_WORKERS", "1")))
    p.add_argument("--sigma", type=float, default=1.0, help="GOE scale")
    p.add_argument("--convention", default="entry", choices=["entry", "bulk"],
                   help="GOE normalization policy")
    _add_output_flags(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("figure", help="run a (d, k) sampling grid from a config")
    p.add_argument("--config", required=True, help="flat key = value file")
    p.add_argument("--workers", type=int,
                   default=(int(os.environ["NCCK_WORKERS"])
                            if "NCCK_WORKERS" in os.environ else None))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("sdp-export", help="export the tracial relaxation (.dat-s)")
    p.add_argument("--objective", required=True)
    p.add_argument("--constraints", default=None,
                   help="file of constraint polynomials, one per line")
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--vars", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sdp_export)

    p = sub.add_parser("sdp-check", help="certify a state against the relaxation")
    _add_law_flags(p)
    p.add_argument("--objective", required=True)
    p.add_argument("--constraints", default=None)
    p.add_argument("--degree", type=int, required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    _add_output_flags(p)
    p.set_defaults(func=cmd_sdp_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        args.func(args)
    except (DomainError, MomentError, RejectionError, PolyParseError,
            ValueError) as exc:
        print(f"ncck: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
