"""Command-line interface: ``lmkaczmarz {run,compare,sweep,verify,list-problems}``."""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from . import harness
from .kaczmarz import InsufficientTrace
from .problems import list_problems

EXIT_FAIL = 1
EXIT_CONFIG = 2

# flag name -> config key
_FLAG_KEYS = {
    "problem": "problem",
    "solver": "solver",
    "noise": "noise",
    "seed": "seed",
    "alpha": "alpha",
    "tau": "tau",
    "q": "q",
    "max_cycles": "max_cycles",
    "cg_iters": "cg_iters",
    "cg_tol": "cg_tol",
    "alpha_mode": "alpha_mode",
    "out_dir": "out_dir",
}


def _add_run_flags(p: argparse.ArgumentParser, solver: bool = True) -> None:
    p.add_argument("--config", help="JSON or YAML file; flags override its fields")
    p.add_argument("--problem", help="registered problem id (see list-problems)")
    if solver:
        p.add_argument("--solver", choices=harness.SOLVERS)
    p.add_argument("--noise", type=float, help="relative noise level, e.g. 0.05")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--max-cycles", type=int)
    p.add_argument("--cg-iters", type=int)
    p.add_argument("--cg-tol", type=float)
    p.add_argument("--alpha-mode", choices=("fixed", "residual-matched"))
    p.add_argument("--out-dir", help=f"output directory (default ${harness.ENV_OUT_DIR} or ./lmk-output)")


def _spec(args, **extra):
    mapping = harness.load_config(args.config) if getattr(args, "config", None) else {}
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            mapping[key] = value
    mapping.update(extra)
    return harness.spec_from_mapping(mapping)


def _cmd_run(args) -> int:
    spec, out_dir = _spec(args)
    rep = harness.run_experiment(spec, out_dir=out_dir)
    print("\n".join(rep.lines()))
    entry = rep.entries[0]
    print(f"artifacts: {entry.run_dir}")
    return 0


def _cmd_compare(args) -> int:
    spec, out_dir = _spec(args)
    rep = harness.compare(spec.problem, spec.rel_noise, spec.seed, spec.overrides, out_dir=out_dir)
    print("\n".join(rep.lines()))
    for name, value in rep.orderings().items():
        print(f"  {name}: {value}")
    return 0


def _cmd_sweep(args) -> int:
    spec, out_dir = _spec(args)
    out = harness.resolve_out_dir(out_dir)
    rep = harness.noise_sweep(spec, args.amplitudes, out_dir=out)
    print("\n".join(rep.lines()))
    print(f"  slope >= -2.2: {rep.slope_ok()}")
    print(f"  final error non-increasing (5%): {rep.final_error_nonincreasing()}")
    print(f"  fixed-k distance non-increasing (5%): {rep.fixed_k_nonincreasing()}")
    return 0


def _cmd_verify(args) -> int:
    reports = []
    if args.run_dirs:
        reports = [harness.verify_suite(d) for d in args.run_dirs]
    else:
        spec, out_dir = _spec(args)
        reports = [harness.verify_suite(spec, out_dir=out_dir)]
    ok = True
    for rep in reports:
        print("\n".join(rep.lines()))
        ok &= rep.ok
    return 0 if ok else EXIT_FAIL


def _cmd_list(args) -> int:
    for name, desc in list_problems().items():
        print(f"{name:26s} {desc}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lmkaczmarz",
        description="Loping Levenberg-Marquardt-Kaczmarz experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one solver and write its artifacts")
    _add_run_flags(p)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("compare", help="run l-LMK and l-LK on the same noisy instance")
    _add_run_flags(p, solver=False)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("sweep", help="noise-amplitude sweep along one noise direction")
    _add_run_flags(p)
    p.add_argument("--amplitudes", type=float, nargs="+", default=[0.04, 0.02, 0.01, 0.005])
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("verify", help="run the invariant checks on a spec or on run directories")
    _add_run_flags(p)
    p.add_argument("run_dirs", nargs="*", help="run directories written by 'run' or 'compare'")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("list-problems", help="list registered problem ids")
    p.set_defaults(func=_cmd_list)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InsufficientTrace as exc:
        print(f"insufficient trace: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
