"""Command-line entry point.

Exit codes: 0 success, 1 selftest failure, 2 invalid input, 3 numerical
failure, 64 unknown subcommand.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import GraphValidationError, NumericalError
from .io import RunConfig, graph_to_dict, parse_complex, parse_graph_file, parse_root, write_csv, write_json

__all__ = ["main", "run_cli"]

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 3, 64
COMMANDS = ("spectrum", "green", "esm", "bs-dist", "lift", "converge", "selftest")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise GraphValidationError(f"{self.prog}: {message}")


def _range3(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise GraphValidationError(f"bad range {text!r}; expected lo:hi:count") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x]
    except ValueError:
        raise GraphValidationError(f"bad number list {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise GraphValidationError(f"bad integer list {text!r}") from None


def _chi(text: str):
    from .spectral import parse_test_function

    try:
        return parse_test_function(text)
    except ValueError as exc:
        raise GraphValidationError(str(exc)) from None


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qgs", description="Spectral and local-convergence computations on quantum graphs.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("spectrum", help="eigenvalues with multiplicities up to --lmax (CSV)")
    s.add_argument("graph")
    s.add_argument("--lmax", type=float, required=True)
    s.add_argument("--method", choices=("auto", "scan", "scattering"), default="auto")
    s.add_argument("--resolution", type=float)
    s.add_argument("--out")

    s = sub.add_parser("green", help="Green's function at a root and spectral parameter (JSON)")
    s.add_argument("graph")
    s.add_argument("--root", required=True, help="b<bond>:<offset> or e<edge>:<position>")
    s.add_argument("--point", help="second argument; defaults to the root")
    s.add_argument("--z", required=True, help="re:im")
    s.add_argument("--out")

    s = sub.add_parser("esm", help="empirical spectral measure: --chi value, --hist bins or smoothed --lam density")
    s.add_argument("graph")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--chi", help="bump:a:b | indicator:a:b | hat:a:b")
    g.add_argument("--hist", help="lo:hi:bins")
    g.add_argument("--lam", help="lo:hi:points for the smoothed density")
    s.add_argument("--eps", help="comma-separated smoothing widths for --lam (default 0.1)")
    s.add_argument("--out")

    s = sub.add_parser("bs-dist", help="local distance between two rooted graphs (JSON)")
    s.add_argument("graph_a")
    s.add_argument("graph_b")
    s.add_argument("--root-a", required=True)
    s.add_argument("--root-b", required=True)
    s.add_argument("--kmax", type=int, default=6)
    s.add_argument("--strict", action="store_true", help="enforce bond orderings at every vertex")
    s.add_argument("--out")

    s = sub.add_parser("lift", help="random connected N-lift (graph JSON plus injectivity profile)")
    s.add_argument("graph")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rmax", type=int, default=4)
    s.add_argument("--out")

    s = sub.add_parser("converge", help="empirical spectral measure against its limit along a family (CSV)")
    s.add_argument("--family", required=True)
    s.add_argument("--sizes", required=True)
    s.add_argument("--chi", required=True)
    s.add_argument("--limit", choices=("analytic", "truncation"), default="analytic")
    s.add_argument("--length", type=float, default=1.0)
    s.add_argument("--condition", default="kirchhoff")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--law", default="fixed")
    s.add_argument("--law-range", help="lo:hi")
    s.add_argument("--radius", type=int, default=12)
    s.add_argument("--base", help="graph file lifted by the n_lift family")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")

    s = sub.add_parser("selftest", help="closed-form checks of every module")
    s.add_argument("--pytest", action="store_true", help="also run the repository test suite")
    return p


def _config(args) -> RunConfig:
    params = {k: v for k, v in vars(args).items() if k not in ("command", "seed") and v is not None and v is not False}
    return RunConfig(args.command, params, int(getattr(args, "seed", 0) or 0))


def _cmd_spectrum(args, cfg, out):
    from .spectral import eigenvalues_up_to

    q = parse_graph_file(args.graph)
    sd = eigenvalues_up_to(q, args.lmax, resolution=args.resolution, method=args.method)
    rows = zip(sd.eigenvalues, sd.multiplicities)
    out(write_csv(args.out, ("lambda", "multiplicity"), rows, cfg), args.out)


def _cmd_green(args, cfg, out):
    from .greens import GreenEvaluation

    q = parse_graph_file(args.graph)
    rq = parse_root(args.root, q)
    z = parse_complex(args.z)
    y = rq if args.point is None else parse_root(args.point, q)
    x0, y0 = (rq.root_bond, rq.root_offset), (y.root_bond, y.root_offset)
    val = GreenEvaluation(rq, z)(x0, y0)
    payload = {"z": [z.real, z.imag], "x": list(x0), "y": list(y0), "re": val.real, "im": val.imag}
    out(write_json(args.out, payload, cfg), args.out)


def _cmd_esm(args, cfg, out):
    from .greens import smoothed_spectral_density
    from .spectral import eigenvalues_up_to, empirical_measure

    q = parse_graph_file(args.graph)
    if args.chi is not None:
        chi = _chi(args.chi)
        value = 0.0 if chi.b <= 0 else empirical_measure(eigenvalues_up_to(q, chi.b)).evaluate(chi)
        out(write_json(args.out, {"chi": chi.descriptor(), "value": value}, cfg), args.out)
    elif args.hist is not None:
        lo, hi, n = _range3(args.hist)
        mu = empirical_measure(eigenvalues_up_to(q, hi))
        rows = mu.histogram(np.linspace(lo, hi, n + 1))
        out(write_csv(args.out, ("bin_left", "bin_right", "mass"), rows, cfg), args.out)
    else:
        lo, hi, n = _range3(args.lam)
        grid = np.linspace(lo, hi, n)
        rows = []
        for eps in _floats(args.eps or "0.1"):
            dens = smoothed_spectral_density(q, grid, eps)
            rows.extend((lam, eps, d) for lam, d in zip(grid, dens))
        out(write_csv(args.out, ("lambda", "eps", "density"), rows, cfg), args.out)


def _cmd_bs(args, cfg, out):
    from .bs_metric import bs_distance

    qa, qb = parse_graph_file(args.graph_a), parse_graph_file(args.graph_b)
    rep = bs_distance(parse_root(args.root_a, qa), parse_root(args.root_b, qb), args.kmax, strict=args.strict)
    out(write_json(args.out, rep.to_dict(), cfg), args.out)


def _cmd_lift(args, cfg, out):
    from .ensembles import injectivity_profile, n_lift

    base = parse_graph_file(args.graph)
    q = n_lift(base, args.n, args.seed)
    payload = {
        "graph": graph_to_dict(q),
        "injectivity_profile": injectivity_profile(q.graph, args.rmax),
        "base_injectivity_profile": injectivity_profile(base.graph, args.rmax),
    }
    out(write_json(args.out, payload, cfg), args.out)


def _cmd_converge(args, cfg, out):
    from .ensembles import EnsembleSpec, convergence_experiment

    law_range = None
    if args.law_range is not None:
        vals = args.law_range.split(":")
        try:
            law_range = (float(vals[0]), float(vals[1]))
        except (ValueError, IndexError):
            raise GraphValidationError(f"bad --law-range {args.law_range!r}; expected lo:hi") from None
    base = parse_graph_file(args.base) if args.base else None
    spec = EnsembleSpec(
        args.family,
        length=args.length,
        condition=args.condition,
        alpha=args.alpha,
        law=args.law,
        law_range=law_range,
        seed=args.seed,
        base=base,
    )
    chi = _chi(args.chi)
    rows = convergence_experiment([(spec, n) for n in _ints(args.sizes)], chi, args.limit, args.radius)
    table = [(r.n, r.esm, r.limit, r.gap, r.seed) for r in rows]
    out(write_csv(args.out, ("N", "esm", "limit", "gap", "seed"), table, cfg), args.out)


def run_cli(argv=None, stdout=None, stderr=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    first = next((a for a in argv if not a.startswith("-")), None)
    if first is not None and first not in COMMANDS:
        print(f"qgs: unknown subcommand {first!r}; expected one of {', '.join(COMMANDS)}", file=stderr)
        return EXIT_USAGE
    parser = _build_parser()

    def out(text: str, path) -> None:
        if path is None or path == "-":
            stdout.write(text)

    try:
        if not argv or argv in (["-h"], ["--help"]):
            parser.print_help(stdout)
            return EXIT_OK if argv else EXIT_USAGE
        args = parser.parse_args(argv)
        if args.command == "selftest":
            from .selftest import run_selftest

            return run_selftest(args.pytest, echo=lambda s: print(s, file=stdout))
        cfg = _config(args)
        handler = {
            "spectrum": _cmd_spectrum,
            "green": _cmd_green,
            "esm": _cmd_esm,
            "bs-dist": _cmd_bs,
            "lift": _cmd_lift,
            "converge": _cmd_converge,
        }[args.command]
        handler(args, cfg, out)
        return EXIT_OK
    except SystemExit as exc:  # --help inside a subcommand
        return int(exc.code or 0)
    except NumericalError as exc:
        print(f"qgs: numerical failure: {exc}", file=stderr)
        return EXIT_NUMERICAL
    except (GraphValidationError, ValueError, json.JSONDecodeError) as exc:
        print(f"qgs: invalid input: {exc}", file=stderr)
        return EXIT_INVALID


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
