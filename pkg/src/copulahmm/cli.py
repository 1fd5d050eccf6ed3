"""Command-line interface: ``copulahmm {fit,select,decode,profile,curves,pmf,simulate}``.

Exit codes: 0 success, 2 parse/config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .copula import Family
from .data import COVARIATE_COLUMNS, DataError, load_dataset, _write_rows
from .decode import covariate_profile, viterbi
from .errors import FitError, NumericalFailure
from .estimation import OptimizerSettings, StartRanges, multi_start_fit, order_states, transition_curve_ci
from .model import emission_grids
from .persist import ModelFileError, atomic_write, load_model, save_model
from .simulate import FootballCovariates, simulate_matches

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
#: observed ranges of shots and touches in the original data
PMF_GRID_SHAPE = (3, 28)

logger = logging.getLogger("copulahmm")


class ConfigError(ValueError):
    pass


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        atomic_write(out, text)


def _fix_pairs(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--fix expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--fix value for {name!r} is not a number: {value!r}") from None
    return out


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _settings(cfg: dict) -> tuple[OptimizerSettings, StartRanges]:
    opt = cfg.get("optimizer", {})
    known = {f.name for f in fields(OptimizerSettings)}
    if set(opt) - known:
        raise ConfigError(f"unknown optimizer settings {sorted(set(opt) - known)}")
    ranges = dict(cfg.get("start_ranges", {}))
    known = {f.name for f in fields(StartRanges)}
    if set(ranges) - known:
        raise ConfigError(f"unknown start ranges {sorted(set(ranges) - known)}")
    for k, v in ranges.items():
        ranges[k] = {kk: tuple(vv) for kk, vv in v.items()} if k == "theta" else tuple(v)
    if "theta" in ranges:
        ranges["theta"] = {**StartRanges().theta, **ranges["theta"]}
    return OptimizerSettings(**opt), StartRanges(**ranges)


def _merge(args, cfg: dict, name: str, default=None):
    value = getattr(args, name, None)
    if value is None:
        value = cfg.get(name, default)
    return value


def _fit_inputs(args):
    cfg = _load_config(getattr(args, "config", None))
    data = _merge(args, cfg, "data")
    seed = _merge(args, cfg, "seed")
    if data is None:
        raise ConfigError("no input data (--data or config 'data')")
    if seed is None:
        raise ConfigError("a seed is required (--seed or config 'seed')")
    covariates = _merge(args, cfg, "covariates", [])
    dataset = load_dataset(data, covariates)
    settings, ranges = _settings(cfg)
    return cfg, dataset, int(seed), settings, ranges


def cmd_fit(args) -> int:
    cfg, dataset, seed, settings, ranges = _fit_inputs(args)
    states = int(_merge(args, cfg, "states", 2))
    copula = _merge(args, cfg, "copula", "clayton")
    starts = int(_merge(args, cfg, "starts", 50))
    out = _merge(args, cfg, "out")
    spec = dataset.model_spec(states, copula)
    res = order_states(multi_start_fit(spec, dataset, starts, seed, ranges, settings))
    if out:
        save_model(res, out)
    print(f"states={states} copula={spec.copula.value} loglik={res.loglik:.3f} "
          f"AIC={res.aic:.2f} BIC={res.bic:.2f} converged={res.converged}")
    if args.pmf_grid:
        _emit(_pmf_table(res), args.pmf_grid)
    return EXIT_OK


def cmd_select(args) -> int:
    cfg, dataset, seed, settings, ranges = _fit_inputs(args)
    states = args.states or cfg.get("states_grid", [2, 3, 4, 5])
    copulas = args.copulas or cfg.get("copulas", ["frank", "clayton", "amh"])
    starts = int(_merge(args, cfg, "starts", 50))
    rows = []
    for n in states:
        for c in copulas:
            spec = dataset.model_spec(int(n), c)
            res = multi_start_fit(spec, dataset, starts, seed, ranges, settings, covariance=False)
            rows.append([n, spec.copula.value, res.n_params, f"{res.loglik:.6f}",
                         f"{res.aic:.4f}", f"{res.bic:.4f}", int(res.converged)])
            logger.info("N=%s %s: AIC %.2f BIC %.2f", n, c, res.aic, res.bic)
    _emit(_table(["states", "copula", "n_params", "loglik", "aic", "bic", "converged"], rows),
          args.out)
    return EXIT_OK


def _model_and_data(args):
    fit = load_model(args.model)
    spec = fit.spec
    dataset = load_dataset(args.data, spec.covariate_names, spec.standardization)
    return fit, dataset


def cmd_decode(args) -> int:
    fit, dataset = _model_and_data(args)
    matches = [dataset.match(args.match_id)] if args.match_id else list(dataset)
    rows = []
    for m in matches:
        dec = viterbi(fit.params, m)
        rows.extend([m.match_id, t + 1, int(s) + 1] for t, s in enumerate(dec.states))
    _emit(_table(["match_id", "t", "state"], rows), args.out)
    return EXIT_OK


def _values(text: str) -> np.ndarray:
    """``a:b:step`` (inclusive) or comma-separated numbers."""
    try:
        if ":" in text:
            a, b, step = (float(v) for v in text.split(":"))
            return np.arange(a, b + step / 2, step)
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse value list {text!r}") from None


def cmd_profile(args) -> int:
    fit = load_model(args.model)
    values = _values(args.values)
    prof = covariate_profile(fit, args.sweep, values, _fix_pairs(args.fix))
    header = [args.sweep] + [f"state_{i + 1}" for i in range(fit.spec.n_states)]
    rows = [[_num(v)] + [f"{p:.10f}" for p in row] for v, row in zip(values, prof)]
    _emit(_table(header, rows), args.out)
    return EXIT_OK


def cmd_curves(args) -> int:
    fit = load_model(args.model)
    grid = _values(args.grid)
    curves = transition_curve_ci(fit, args.sweep, grid, _fix_pairs(args.fix), args.draws, args.seed)
    n = fit.spec.n_states
    rows = [
        [_num(v), i + 1, j + 1, f"{curves.point[g, i, j]:.10f}",
         f"{curves.lower[g, i, j]:.10f}", f"{curves.upper[g, i, j]:.10f}"]
        for g, v in enumerate(grid) for i in range(n) for j in range(n)
    ]
    _emit(_table([args.sweep, "from", "to", "point", "lower", "upper"], rows), args.out)
    return EXIT_OK


def _pmf_table(fit) -> str:
    k1, k2 = PMF_GRID_SHAPE
    grids = emission_grids(fit.params, k1, k2)
    rows = [[i + 1, a, b, f"{grids[i, a, b]:.12g}"]
            for i in range(fit.spec.n_states) for a in range(k1 + 1) for b in range(k2 + 1)]
    return _table(["state", "shots", "touches", "pmf"], rows)


def cmd_pmf(args) -> int:
    _emit(_pmf_table(load_model(args.model)), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    fit = load_model(args.model)
    gen = FootballCovariates(market_value=args.market_value, home=args.home)
    matches = simulate_matches(fit.params, args.matches, args.minutes, gen, args.seed)
    buf = io.StringIO()
    _write_rows(buf, matches)
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="copulahmm", description="Fit and apply copula-linked CMP hidden Markov models.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def fitting(sp):
        sp.add_argument("--config", help="JSON run configuration; flags override it")
        sp.add_argument("--data", help="input CSV")
        sp.add_argument("--covariates", nargs="*", choices=COVARIATE_COLUMNS, default=None)
        sp.add_argument("--starts", type=int)
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("fit", help="fit one model by multi-start maximum likelihood")
    fitting(sp)
    sp.add_argument("--states", type=int)
    sp.add_argument("--copula", choices=[f.value for f in Family])
    sp.add_argument("--out", help="model file (JSON)")
    sp.add_argument("--pmf-grid", help="also write the state-dependent pmf grid CSV here")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("select", help="AIC/BIC table over state counts and copulas")
    fitting(sp)
    sp.add_argument("--states", type=int, nargs="+")
    sp.add_argument("--copulas", nargs="+", choices=[f.value for f in Family])
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("decode", help="Viterbi state sequences")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--match-id")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("profile", help="stationary distributions along one covariate")
    sp.add_argument("--model", required=True)
    sp.add_argument("--sweep", required=True)
    sp.add_argument("--values", required=True, help="a:b:step or comma list (raw units); write --values=-2:2:1 "
                    "when the first value is negative")
    sp.add_argument("--fix", nargs="*", metavar="NAME=VALUE")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_profile)

    sp = sub.add_parser("curves", help="transition probabilities along one covariate with MC bands")
    sp.add_argument("--model", required=True)
    sp.add_argument("--sweep", default="minute")
    sp.add_argument("--grid", default="1:95:1", help="a:b:step or comma list (raw units)")
    sp.add_argument("--fix", nargs="*", metavar="NAME=VALUE")
    sp.add_argument("--draws", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("pmf", help="state-dependent pmf grid over shots 0..3, touches 0..28")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_pmf)

    sp = sub.add_parser("simulate", help="simulate matches from a model file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--matches", type=int, default=34)
    sp.add_argument("--minutes", type=int, default=95)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--market-value", type=float, default=200.0)
    sp.add_argument("--home", type=int, choices=(0, 1), default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return args.func(args)
    except (NumericalFailure, FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DataError, ModelFileError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
