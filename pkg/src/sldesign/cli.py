"""Command-line entry point: ``sldesign <command> --config FILE ...``."""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig
from .design import ace_optimize, equally_spaced
from .kinetics import Design
from .sampling import prior_predictive, quantile_bands
from .summaries import informativeness_report
from .synlik import CTMCSummaryModel
from .utilities import AllScreenedOutError, expected_utility
from .validation import validate_designs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("sldesign")


class NumericalFailure(RuntimeError):
    pass


def read_design(path, space=None):
    """Observation times from a CSV file with a ``time`` column."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"--design: cannot read {path} ({exc.strerror})") from None
    if not rows or "time" not in rows[0]:
        raise ConfigError(f"--design: {path} needs a header row with a 'time' column")
    try:
        times = np.array([float(r["time"]) for r in rows])
    except ValueError:
        raise ConfigError(f"--design: {path} has a non-numeric time") from None
    if space is not None and not space.contains(times):
        raise ConfigError(f"--design: {path} violates the configured design space")
    try:
        if space is None:
            return Design(times)
        return space.design(times)
    except ValueError as exc:
        raise ConfigError(f"--design: {exc}") from None


def write_design(path, times):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "time"])
        for i, t in enumerate(times):
            w.writerow([i, repr(float(t))])


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def _ctmc_models(cfg, command):
    models = cfg.build_models()
    if not all(isinstance(m, CTMCSummaryModel) for m in models):
        raise ConfigError(f"{command} needs CTMC models; the surrogate has no trajectories")
    return models


def _design_or_default(args, cfg):
    space = cfg.design_space()
    if args.design:
        return read_design(args.design[0], space)
    return equally_spaced(space)


def cmd_simulate(cfg, args, out):
    design = _design_or_default(args, cfg)
    models = _ctmc_models(cfg, "simulate")
    for i, model in enumerate(models):
        seed = np.random.SeedSequence([cfg.seed, i])
        draws = prior_predictive(model.model, model.prior, design, cfg.simulate_Q, "mc",
                                 seed, cfg.simulator, cfg.tau)
        species = list(model.model.observed_species)
        names = list(model.model.param_names)
        with open(out / f"trajectories_{model.name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["draw", *names, "time", *species])
            for k, (theta, traj) in enumerate(draws):
                for t, row in zip(design.times, traj.observations):
                    w.writerow([k, *map(repr, map(float, theta)), repr(float(t)),
                                *map(int, row)])
        bands = quantile_bands([traj for _, traj in draws], (0.1, 0.5, 0.9))
        with open(out / f"bands_{model.name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "species", "q10", "q50", "q90"])
            for j, t in enumerate(design.times):
                for s, sp in enumerate(species):
                    w.writerow([repr(float(t)), sp, *(repr(float(bands[b, j, s]))
                                                      for b in range(3))])
    write_design(out / "design.csv", design.times)
    return {"models": [m.name for m in models], "Q": cfg.simulate_Q}


def _estimate(cfg, models, times, seed, threads):
    est = cfg.estimator
    try:
        return expected_utility(models, times, cfg.utility, est.Q, est.method, seed,
                                est.laplace_options(), cfg.model_prior, est.likelihood,
                                est.n_randomizations, threads)
    except AllScreenedOutError as exc:
        raise NumericalFailure(str(exc)) from None


def cmd_evaluate(cfg, args, out):
    design = _design_or_default(args, cfg)
    models = cfg.build_models()
    repeats = args.repeats or 1
    seeds = np.random.SeedSequence(cfg.seed).spawn(repeats)
    runs = [_estimate(cfg, models, design.times, s, args.threads) for s in seeds]
    payload = runs[0].to_dict()
    payload["design"] = [float(t) for t in design.times]
    if repeats > 1:
        means = np.array([r.mean for r in runs])
        with open(out / "repeats.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "mean", "se", "substituted"])
            for i, r in enumerate(runs):
                w.writerow([i, repr(float(r.mean)), repr(float(r.se)), r.substituted])
        payload.update(repeats=repeats, mean=float(means.mean()),
                       sd=float(means.std(ddof=1)),
                       substituted=int(sum(r.substituted for r in runs)))
    _write_json(out / "estimate.json", payload)
    return payload


def cmd_optimize(cfg, args, out):
    space = cfg.design_space()
    d0 = read_design(args.design[0], space) if args.design else equally_spaced(space)
    models = cfg.build_models()

    def objective(times, Q, seed):
        est = cfg.estimator
        try:
            return expected_utility(models, times, cfg.utility, Q, est.method, seed,
                                    est.laplace_options(), cfg.model_prior,
                                    est.likelihood, est.n_randomizations,
                                    args.threads).mean
        except AllScreenedOutError as exc:
            raise NumericalFailure(str(exc)) from None

    result = ace_optimize(objective, d0, space, cfg.ace_options(), cfg.seed)
    result.to_csv(out / "design.csv")
    result.to_json(out / "trace.json")
    return {"design": [float(t) for t in result.design.times],
            "utility": float(result.utility), "n_evaluations": result.n_evaluations}


def cmd_validate(cfg, args, out):
    if not args.design:
        raise ConfigError("validate: pass at least one --design file")
    space = cfg.design_space()
    designs = {}
    for i, path in enumerate(args.design):
        designs[f"{i}:{Path(path).stem}"] = read_design(path, space).times
    models = cfg.build_models()
    v = cfg.validation
    report = validate_designs(models, designs, R=args.repeats or v.R, seed=cfg.seed,
                              opts=cfg.estimator.laplace_options(),
                              model_prior=cfg.model_prior, n_is=v.n_is,
                              inflation=v.inflation, likelihood=cfg.estimator.likelihood)
    report.to_csv(out / "validation.csv")
    summary = {f"{d}|{m}": {"median_prob_true_model": p, "median_logdet_precision": l}
               for (d, m), (p, l) in report.medians().items()}
    _write_json(out / "validation_summary.json", summary)
    return summary


def cmd_diagnose(cfg, args, out):
    design = _design_or_default(args, cfg)
    models = _ctmc_models(cfg, "diagnose")
    Q = max(cfg.simulate_Q, 100)
    for i, model in enumerate(models):
        seed = np.random.SeedSequence([cfg.seed, i])
        report = informativeness_report(model.model, model.prior, design, Q,
                                        model.scheme, seed, cfg.simulator,
                                        cfg.tau)
        report.correlations_to_csv(out / f"correlations_{model.name}.csv")
        report.scatter_to_csv(out / f"scatter_{model.name}.csv")
    return {"models": [m.name for m in models], "Q": Q}


HELP = {
    "simulate": "prior-predictive trajectories and quantile bands",
    "evaluate": "expected utility of a design",
    "optimize": "approximate coordinate exchange over the design space",
    "validate": "replicate posterior-quality study of one or more designs",
    "diagnose": "informativeness of the summary statistics",
}

COMMANDS = {
    "simulate": cmd_simulate,
    "evaluate": cmd_evaluate,
    "optimize": cmd_optimize,
    "validate": cmd_validate,
    "diagnose": cmd_diagnose,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sldesign",
        description="Bayesian design for stochastic kinetic models via synthetic "
                    "likelihood Laplace approximations.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--design", action="append", default=[],
                       help="design CSV with a 'time' column (repeatable for validate)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--out", help="output directory, overrides the config")
        p.add_argument("--repeats", type=int,
                       help="independent re-evaluations (evaluate) or replicates (validate)")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed: must be nonnegative")
            cfg.seed = args.seed
        if args.repeats is not None and args.repeats < 1:
            raise ConfigError("--repeats: must be >= 1")
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        out = Path(args.out or cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cfg, args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(result))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
