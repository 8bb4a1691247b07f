"""Command-line interface.

Subcommands: ``critvals`` (tabulate critical values), ``simulate`` (write a
model path to CSV), ``fit`` (quasi-MLE plus one-step update), ``test``
(full goodness-of-fit report) and ``experiment`` (size/power study from a
JSON config).  Exit codes: 0 success, 1 input error, 2 numeric or
estimation error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import EstimationError, InputError, NumericError
from .estimation import fit_model
from .harness import (
    ExperimentConfig,
    analyze,
    read_series,
    run_size_power,
    tabulate,
    write_series,
)
from .models import params_from_dict, simulate


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _parse_params(model: str, text: str) -> dict:
    pairs: dict[str, float] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        key, sep, val = part.partition("=")
        if not sep:
            raise InputError(f"bad parameter spec {part!r}; expected key=value")
        try:
            pairs[key.strip()] = float(val)
        except ValueError:
            raise InputError(f"bad numeric value in {part!r}") from None
    if model != "garch":
        return pairs
    alphas = sorted(k for k in pairs if k.startswith("alpha") and k not in ("alpha", "alpha0"))
    betas = sorted(k for k in pairs if k.startswith("beta") and k != "beta")
    out = {"alpha0": pairs.get("alpha0", 0.0)}
    out["alpha"] = [pairs[k] for k in alphas] if alphas else [pairs.get("alpha", 0.0)]
    out["beta"] = [pairs[k] for k in betas] if betas else [pairs.get("beta", 0.0)]
    return out


def _parse_levels(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise InputError(f"bad levels {text!r}; expected comma-separated numbers") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="innovtest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("critvals", help="tabulate critical values of the limit statistic")
    p.add_argument("--family", choices=("normal", "dexp"), default="normal")
    p.add_argument("--r-max", type=int, default=10)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--grid", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None,
                   help="tabulation seed (default: the family's shipped-table seed)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="simulate a model path to CSV")
    p.add_argument("--model", choices=("garch", "ar-garch", "arma-garch"), required=True)
    p.add_argument("--params", required=True, help="e.g. a=0.5,alpha0=0.025,alpha=0.25,beta=0.5")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--law", default="normal",
                   help="innovation law: normal, a1..a5, or dexp")
    p.add_argument("--burn-in", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit a model by quasi-MLE plus one-step update")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=("garch", "ar-garch", "arma-garch"), required=True)
    p.add_argument("--null", choices=("normal", "dexp"), default="normal")
    p.add_argument("--p1", type=int, default=1)
    p.add_argument("--p2", type=int, default=1)
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")

    p = sub.add_parser("test", help="goodness-of-fit test of the innovation distribution")
    p.add_argument("--input", required=True)
    p.add_argument("--model", choices=("garch", "ar-garch", "arma-garch"), required=True)
    p.add_argument("--null", choices=("normal", "dexp"), default="normal")
    p.add_argument("--levels", default="0.01,0.05,0.10")
    p.add_argument("--p1", type=int, default=1)
    p.add_argument("--p2", type=int, default=1)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("experiment", help="run a size/power experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output prefix; writes PREFIX.csv and PREFIX.json")

    return parser


def _cmd_critvals(args) -> None:
    table = tabulate(
        args.family, args.r_max, reps=args.reps, grid_points=args.grid,
        seed=args.seed, out=args.out,
    )
    print(f"wrote {args.out}: family={table.family} r=1..{args.r_max} "
          f"reps={table.reps} grid={table.grid_points}")


def _cmd_simulate(args) -> None:
    params = params_from_dict(args.model, _parse_params(args.model, args.params))
    rng = np.random.default_rng(args.seed)
    y = simulate(params, args.n, innovations=args.law, burn_in=args.burn_in, rng=rng)
    write_series(y, args.out)
    print(f"wrote {args.out}: {args.n} observations from {args.model}")


def _cmd_fit(args) -> None:
    from .harness import _template_params

    y = read_series(args.input)
    template = _template_params(args.model, args.p1, args.p2)
    fit = fit_model(y, template, args.null)
    names = fit.theta_hat.names()
    est = fit.theta_hat.to_array()
    init = fit.theta_tilde.to_array()
    if args.json:
        print(json.dumps({
            "model": args.model,
            "null_family": args.null,
            "parameters": {
                nm: {"estimate": float(v), "se": float(s), "qmle": float(t)}
                for nm, v, s, t in zip(names, est, fit.se, init)
            },
            "loglik": fit.loglik,
            "converged": fit.converged,
            "iterations": fit.iterations,
        }, indent=2))
        return
    print(f"model: {args.model}   null: {args.null}   n = {y.size}")
    print("  parameter     one-step     std.err        qmle")
    for nm, v, s, t in zip(names, est, fit.se, init):
        print(f"  {nm:<10}  {v:>10.4f}   ({s:.4f})   {t:>9.4f}")
    print(f"  log-likelihood: {fit.loglik:.2f}   converged: {fit.converged}")


def _cmd_test(args) -> None:
    report = analyze(
        args.input, model=args.model, null_family=args.null,
        levels=_parse_levels(args.levels), p1=args.p1, p2=args.p2,
    )
    if args.json:
        print(json.dumps(report.to_json_dict(), indent=2))
    else:
        print(report.to_text())


def _cmd_experiment(args) -> None:
    config = ExperimentConfig.from_json(args.config)
    result = run_size_power(config)
    if args.out:
        result.to_csv(args.out + ".csv")
        with open(args.out + ".json", "w") as fh:
            json.dump(result.to_json_dict(), fh, indent=2)
        print(f"wrote {args.out}.csv and {args.out}.json")
    for a in config.levels:
        print(f"level {a:g}: rejection rate {result.rate(a):.4f} "
              f"(se {result.binomial_se(a):.4f}, {result.reps_effective} reps)")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = {
            "critvals": _cmd_critvals,
            "simulate": _cmd_simulate,
            "fit": _cmd_fit,
            "test": _cmd_test,
            "experiment": _cmd_experiment,
        }[args.command]
        handler(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericError, EstimationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
