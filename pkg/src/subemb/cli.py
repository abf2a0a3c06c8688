"""Command line interface.

Exit codes: 0 success, 2 parameter/config error, 3 budget or overflow,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .complexity import estimate_complexity, estimate_width
from .ensembles import (COLUMN_NORMALIZED, VARIANTS, EnsembleSpec,
                        dump_matrix, sample_matrix)
from .errors import BudgetError, ParameterError, ResampleExhaustedError
from .experiments import ExperimentConfig, emit_report, run_experiment
from .isometry import isometry_trials
from .oracles import (binom_central_moments, binom_sqrt_deviation,
                      choose_n_for_lower_bound, collision_probability,
                      quadrature, scalar_psi2_closed_form)
from .rng import SeedPath
from .testsets import build_set

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_IO = 4


def _ensemble_from_args(args) -> EnsembleSpec:
    if args.variant == COLUMN_NORMALIZED:
        if args.base is None:
            raise ParameterError("column_normalized requires --base")
        base = EnsembleSpec(args.base, args.m, args.n, s=args.s)
        target = args.target_norm
        if target is None:
            target = base.default_lambda()
        return EnsembleSpec(COLUMN_NORMALIZED, args.m, args.n, s=args.s,
                            target_norm=target,
                            min_norm_fraction=args.min_norm_fraction,
                            base=base, max_resamples=args.max_resamples)
    return EnsembleSpec(args.variant, args.m, args.n, s=args.s)


def _set_from_args(args):
    params = {}
    if args.k is not None:
        params["k"] = args.k
    if args.d is not None:
        params["d"] = args.d
    if args.count is not None:
        params["count"] = args.count
    if args.set_seed is not None:
        params["seed"] = args.set_seed
    return build_set(args.set, args.n, **params)


def _add_ensemble_args(p):
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--base", choices=[v for v in VARIANTS if v != COLUMN_NORMALIZED],
                   default=None, help="base variant for column_normalized")
    p.add_argument("--target-norm", dest="target_norm", type=float, default=None)
    p.add_argument("--min-norm-fraction", dest="min_norm_fraction", type=float,
                   default=0.5)
    p.add_argument("--max-resamples", dest="max_resamples", type=int, default=1000)


def _add_set_args(p):
    p.add_argument("--set", required=True,
                   choices=["singleton", "basis", "difference", "pair_differences",
                            "k_sparse", "subspace", "sphere_sample"])
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--set-seed", dest="set_seed", type=int, default=None)


def _cmd_generate(args) -> int:
    spec = _ensemble_from_args(args)
    A = sample_matrix(spec, SeedPath(args.seed, args.trial))
    text = dump_matrix(A)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_width(args) -> int:
    T = _set_from_args(args)
    est = (estimate_complexity if args.kind == "complexity" else estimate_width)(
        T, args.samples, args.seed)
    json.dump({"set": T.label, "kind": est.kind, "value": est.value,
               "stderr": est.stderr, "samples": est.samples}, sys.stdout)
    sys.stdout.write("\n")
    return EXIT_OK


def _cmd_isometry(args) -> int:
    spec = _ensemble_from_args(args)
    T = _set_from_args(args)
    lam = args.lam if args.lam is not None else spec.default_lambda()
    report = isometry_trials(spec, T, lam, args.trials, args.seed,
                             retain=args.retain)
    text = report.to_json() + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_experiment(args) -> int:
    with open(args.config) as fh:
        raw = json.load(fh)
    cfg = ExperimentConfig.from_dict(raw)
    report = run_experiment(cfg)
    if cfg.output:
        fmt = "json" if cfg.output.endswith(".json") else "csv"
        emit_report(report, fmt, cfg.output)
    else:
        json.dump(report.to_dict(), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    name = args.name
    p = args.params
    if name == "binom_sqrt_deviation":
        value = binom_sqrt_deviation(int(p[0]), int(p[1])).value
    elif name == "binom_central_moments":
        second, fourth = binom_central_moments(int(p[0]), int(p[1]))
        print(f"{second!r} {fourth!r}")
        return EXIT_OK
    elif name == "collision_probability":
        value = collision_probability(int(p[0]), int(p[1])).value
    elif name == "choose_n_for_lower_bound":
        value = choose_n_for_lower_bound(int(p[0]), int(p[1]))
        print(value)
        return EXIT_OK
    elif name == "scalar_psi2":
        kind = p[0]
        if kind == "sparse_sign":
            value = scalar_psi2_closed_form(kind, m=int(p[1]), s=int(p[2])).value
        elif kind == "constant":
            value = scalar_psi2_closed_form(kind, c=float(p[1])).value
        else:
            value = scalar_psi2_closed_form(kind).value
    elif name == "quadrature":
        d = int(p[1]) if len(p) > 1 else None
        value = quadrature(p[0], d=d).value
    else:
        raise ParameterError(f"unknown oracle {name!r}")
    print(repr(value))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subemb")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="dump one sampled matrix")
    _add_ensemble_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("width", help="estimate Gaussian width or complexity")
    _add_set_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=["width", "complexity"], default="width")
    p.set_defaults(fn=_cmd_width)

    p = sub.add_parser("isometry", help="single-cell distortion report")
    _add_ensemble_args(p)
    _add_set_args(p)
    p.add_argument("--lam", type=float, default=None,
                   help="centering lambda (default: ensemble convention)")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--retain", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_isometry)

    p = sub.add_parser("experiment", help="run a configured experiment")
    esub = p.add_subparsers(dest="experiment_command", required=True)
    pr = esub.add_parser("run")
    pr.add_argument("--config", required=True)
    pr.set_defaults(fn=_cmd_experiment)

    p = sub.add_parser("oracle", help="evaluate an exact oracle")
    p.add_argument("name")
    p.add_argument("params", nargs="*")
    p.set_defaults(fn=_cmd_oracle)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, ResampleExhaustedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, IndexError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
