"""Command-line entry points: design generation, test-function evaluation,
fitting, diagnostics, region selection, validation and prediction.

Exit codes: 0 success, 2 validation/parse error, 3 numerical error,
4 fit saved but unconverged.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .design import DesignError, extended_lhc, maximin_lhc
from .io import (
    ArtifactError,
    EnsembleFormatError,
    RunConfig,
    load_artifact,
    load_ensemble,
    mixture_to_dict,
    nonstationary_to_dict,
    save_artifact,
    save_ensemble,
    standardizer_from_dict,
    stationary_to_dict,
    _atomic_write_text,
)
from .kernels import FactorizationError
from .mixture import MixtureError, MixtureFit, select_regions
from .nonstationary import FittedNonstationaryGP, fit_nonstationary, predict_nonstationary
from .pipeline import PipelinePredictor, StageError, run_pipeline
from .stationary import (
    FitError,
    fit_stationary,
    loo_standardized_residuals,
    predict_stationary,
)
from .testfns import REGISTRY, evaluate
from .validation import lolho_report, score_predictions

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_UNCONVERGED = 4


def _out_path(args, name):
    import os

    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


class Manifest:
    def __init__(self, args, config):
        self.record = {
            "command": args.command,
            "seed": config.seed,
            "config_hash": config.digest(),
            "version": __version__,
            "outputs": [],
        }
        self.args = args

    def add(self, path):
        self.record["outputs"].append(path)
        return path

    def write(self):
        path = _out_path(self.args, f"manifest_{self.args.command}.json")
        _atomic_write_text(path, json.dumps(self.record, indent=2))


def _load_config(args):
    config = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        config.seed = args.seed
    config.out_dir = args.out
    return config


def _write_predictions_csv(path, X, truth, mean, lower, upper, passed=None):
    header = [f"x{j + 1}" for j in range(X.shape[1])] + ["truth", "mean", "lower", "upper", "pass"]
    lines = [",".join(header)]
    for i in range(X.shape[0]):
        t = "" if truth is None else repr(float(truth[i]))
        ok = "" if passed is None else str(int(passed[i]))
        cells = [repr(float(v)) for v in X[i]] + [t, repr(float(mean[i])), repr(float(lower[i])), repr(float(upper[i])), ok]
        lines.append(",".join(cells))
    _atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_design(args, config, manifest):
    if args.folds > 1:
        if args.n % args.folds:
            raise DesignError("n must be a multiple of the fold count")
        design = extended_lhc(args.n // args.folds, args.folds, args.p, seed=config.seed)
    else:
        design = maximin_lhc(args.n, args.p, seed=config.seed)
    points = design.points
    if args.function:
        domain = np.asarray(REGISTRY[args.function]["domain"])
        points = domain[:, 0] + (points + 1.0) / 2.0 * (domain[:, 1] - domain[:, 0])
    save_ensemble(manifest.add(_out_path(args, "design.csv")), points)
    _atomic_write_text(
        manifest.add(_out_path(args, "design_folds.csv")),
        "fold\n" + "\n".join(str(k) for k in design.fold_labels) + "\n",
    )
    return EXIT_OK


def cmd_eval(args, config, manifest):
    ens = load_ensemble(args.input)
    y = evaluate(args.function, ens.X)
    save_ensemble(manifest.add(_out_path(args, "ensemble.csv")), ens.X, y)
    return EXIT_OK


def cmd_fit(args, config, manifest):
    ens = load_ensemble(args.ensemble)
    if not ens.has_response:
        raise EnsembleFormatError(f"{args.ensemble}: fit requires a y column")
    from .design import standardize

    std, X, F = standardize(ens.X, ens.F, config.input_ranges)
    fit = fit_stationary(
        X, F, config.gp_prior(), config.sampler_config(), max_cached_draws=config.max_cached_draws
    )
    save_artifact(
        manifest.add(_out_path(args, "stationary.json")),
        stationary_to_dict(fit),
        standardizer=std,
        extra={"seed": config.seed},
    )
    return EXIT_OK if fit.converged else EXIT_UNCONVERGED


def cmd_diagnose(args, config, manifest):
    fit, std, _ = load_artifact(args.artifact)
    e = loo_standardized_residuals(fit)
    header = [f"x{j + 1}" for j in range(fit.p)] + ["residual"]
    lines = [",".join(header)]
    for i in range(fit.n):
        lines.append(",".join(repr(float(v)) for v in fit.X[i]) + f",{e[i]!r}")
    _atomic_write_text(manifest.add(_out_path(args, "loo_residuals.csv")), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_select_l(args, config, manifest):
    fit, std, _ = load_artifact(args.artifact)
    e = loo_standardized_residuals(fit)
    from .mixture import FeatureMap

    report = select_regions(
        fit.X,
        e,
        L_max=config.L_max,
        config=config.sampler_config(seed_offset=1, stage="mixture"),
        feature_map=FeatureMap(intercept=config.mixture_intercept),
        band=config.waic_band,
    )
    _atomic_write_text(manifest.add(_out_path(args, "waic_table.txt")), report.table() + "\n")
    chosen = report.fits[report.selected_L]
    save_artifact(
        manifest.add(_out_path(args, "mixture.json")),
        mixture_to_dict(chosen),
        standardizer=std,
        extra={"waic": report.waic, "selected_L": report.selected_L},
    )
    return EXIT_OK


def cmd_fit_ns(args, config, manifest):
    ens = load_ensemble(args.ensemble)
    mix, std, _ = load_artifact(args.mixture)
    if not isinstance(mix, MixtureFit):
        raise ArtifactError(f"{args.mixture} is not a mixture artifact")
    X = std.transform_inputs(ens.X)
    F = std.transform_response(ens.F)
    fit = fit_nonstationary(
        X,
        F,
        mix.lambda_hat,
        mix.L,
        config.gp_prior(),
        config.sampler_config(seed_offset=2, stage="nonstationary"),
        max_cached_draws=config.max_cached_draws,
    )
    # an L=1 mixture degenerates to the stationary emulator
    payload = (
        nonstationary_to_dict(fit, mix)
        if isinstance(fit, FittedNonstationaryGP)
        else stationary_to_dict(fit)
    )
    save_artifact(
        manifest.add(_out_path(args, "nonstationary.json")),
        payload,
        standardizer=std,
        extra={"seed": config.seed},
    )
    return EXIT_OK if fit.converged else EXIT_UNCONVERGED


def _predict_with(fit, std, X_raw):
    Xs = std.transform_inputs(X_raw)
    if isinstance(fit, FittedNonstationaryGP):
        summary = predict_nonstationary(fit, Xs)
    else:
        summary = predict_stationary(fit, Xs)
    return std.inverse_response(summary.mean), std.inverse_sd(summary.sd)


def cmd_validate(args, config, manifest):
    fit, std, _ = load_artifact(args.artifact)
    test = load_ensemble(args.test)
    if not test.has_response:
        raise EnsembleFormatError(f"{args.test}: validation requires a y column")
    mean, sd = _predict_with(fit, std, test.X)
    scores = score_predictions(test.F, mean, sd, config.alpha)
    summary = {
        "interval_score": scores.mean_interval_score,
        "rmse": scores.rmse,
        "coverage": scores.coverage_count / scores.n,
        "n": scores.n,
        "alpha": config.alpha,
    }
    _atomic_write_text(manifest.add(_out_path(args, "scores.json")), json.dumps(summary, indent=2))
    _write_predictions_csv(
        manifest.add(_out_path(args, "validation_points.csv")),
        test.X, test.F, scores.mean, scores.lower, scores.upper, scores.inside,
    )
    print(f"IS {summary['interval_score']:.4f}  RMSE {summary['rmse']:.4f}  "
          f"coverage {summary['coverage']:.3f}")
    return EXIT_OK


def cmd_lolho(args, config, manifest):
    ens = load_ensemble(args.ensemble)
    with open(args.folds, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if lines and not lines[0].lstrip("-").isdigit():
        lines = lines[1:]
    labels = np.asarray([int(v) for v in lines])
    if labels.size != ens.n:
        raise EnsembleFormatError("fold label count does not match ensemble size")

    def factory(use_ns):
        def build(X_train, F_train):
            from .io import Ensemble

            result = run_pipeline(config, Ensemble(X=X_train, F=F_train))
            return PipelinePredictor(result, use_nonstationary=use_ns)

        return build

    rows = {}
    for name, use_ns in (("st-GP", False), ("nst-GP", True)):
        reports = lolho_report(ens.X, labels, ens.F, factory(use_ns), config.alpha)
        rows[name] = reports
        for rep in reports:
            tag = "FAILED " + rep.failure if rep.failed else (
                f"IS {rep.mean_interval_score:.3f}  RMSE {rep.rmse:.3f}"
            )
            print(f"{name}  fold {rep.fold}: {tag}")
    summary = {
        name: [
            {"fold": r.fold, "failed": r.failed,
             "interval_score": None if r.failed else r.mean_interval_score,
             "rmse": None if r.failed else r.rmse}
            for r in reports
        ]
        for name, reports in rows.items()
    }
    _atomic_write_text(manifest.add(_out_path(args, "lolho_scores.json")), json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_predict(args, config, manifest):
    fit, std, _ = load_artifact(args.artifact)
    points = load_ensemble(args.input)
    mean, sd = _predict_with(fit, std, points.X)
    z = 2.0
    _write_predictions_csv(
        manifest.add(_out_path(args, "predictions.csv")),
        points.X, points.F, mean, mean - z * sd, mean + z * sd,
    )
    return EXIT_OK


def cmd_run(args, config, manifest):
    """Full pipeline: fit, diagnose, select L, fit mixture emulator, report."""
    ens = load_ensemble(args.ensemble)
    result = run_pipeline(config, ens)
    _atomic_write_text(
        manifest.add(_out_path(args, "waic_table.txt")), result.selection.table() + "\n"
    )
    save_artifact(
        manifest.add(_out_path(args, "stationary.json")),
        stationary_to_dict(result.stationary_fit),
        standardizer=result.standardizer,
    )
    if result.nonstationary_fit is not None:
        save_artifact(
            manifest.add(_out_path(args, "nonstationary.json")),
            nonstationary_to_dict(result.nonstationary_fit, result.mixture_fit),
            standardizer=result.standardizer,
        )
    report = {
        "selected_L": result.selected_L,
        "waic": result.selection.waic,
        "stationary_loo_is": result.stationary_loo.mean_interval_score,
        "nonstationary_loo_is": None
        if result.nonstationary_loo is None
        else result.nonstationary_loo.mean_interval_score,
        "notices": result.notices,
    }
    _atomic_write_text(manifest.add(_out_path(args, "report.json")), json.dumps(report, indent=2))
    for notice in result.notices:
        print(notice)
    print(result.selection.table())
    converged = result.stationary_fit.converged and (
        result.nonstationary_fit is None or result.nonstationary_fit.converged
    )
    return EXIT_OK if converged else EXIT_UNCONVERGED


# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="mixemu", description=__doc__)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--config", default=None, help="JSON/YAML run config")
    parser.add_argument("--out", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="generate a (k-extended) maximin LHC")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--folds", type=int, default=1)
    p.add_argument("--function", choices=sorted(REGISTRY), default=None,
                   help="scale points to this test function's native domain")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("eval", help="evaluate a test function on a design CSV")
    p.add_argument("--function", choices=sorted(REGISTRY), required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fit", help="fit the stationary emulator")
    p.add_argument("--ensemble", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="leave-one-out standardized residuals")
    p.add_argument("--artifact", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("select-l", help="WAIC-based choice of region count")
    p.add_argument("--artifact", required=True, help="stationary artifact")
    p.set_defaults(func=cmd_select_l)

    p = sub.add_parser("fit-ns", help="fit the mixture-kernel emulator")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--mixture", required=True, help="mixture artifact")
    p.set_defaults(func=cmd_fit_ns)

    p = sub.add_parser("validate", help="score an emulator on a test ensemble")
    p.add_argument("--artifact", required=True)
    p.add_argument("--test", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("lolho", help="leave-one-Latin-hypercube-out diagnostics")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--folds", required=True, help="fold-label file (one int per run)")
    p.set_defaults(func=cmd_lolho)

    p = sub.add_parser("predict", help="predict at new points from an artifact")
    p.add_argument("--artifact", required=True)
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("run", help="full diagnostic-led pipeline")
    p.add_argument("--ensemble", required=True)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    manifest = Manifest(args, config)
    try:
        code = args.func(args, config, manifest)
    except (EnsembleFormatError, ArtifactError, DesignError, MixtureError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FactorizationError, FitError, StageError, FloatingPointError) as err:
        print(f"numerical error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    manifest.write()
    return code


if __name__ == "__main__":
    sys.exit(main())
