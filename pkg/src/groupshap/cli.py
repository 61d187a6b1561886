"""Command-line interface: ``gshap explain | simulate | verify | plot``.

Exit codes: 0 success, 1 runtime or numerical failure, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import rng as rngmod
from .coalitions import DEFAULT_EXACT_CAP, partition_from_json
from .contributions import AnalyticEstimator, ContributionCache, MonteCarloEstimator
from .errors import (
    CapacityError,
    ConditionsNotMet,
    EnumerationRefused,
    GroupShapError,
    NotPositiveDefiniteError,
    ValidationError,
)
from .experiments import (
    ERROR_COLUMNS,
    RECORD_COLUMNS,
    SUMMARY_COLUMNS,
    ExperimentConfig,
    records_from_csv,
    run_experiment,
    summarize,
    to_csv,
)
from .explainer import feature_shapley, group_shapley, post_grouped_shapley
from .gaussian import distribution_from_json
from .models import model_from_json, standardize
from .theory import closed_form_group_values

log = logging.getLogger("groupshap")

INPUT_ERRORS = (
    ValidationError,
    ConditionsNotMet,
    EnumerationRefused,
    CapacityError,
    NotPositiveDefiniteError,
)
EXPLAIN_COLUMNS = (
    "instance", "label", "phi", "base_value", "predicted", "efficiency_residual", "phi_se",
)


class InputError(Exception):
    pass


def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def _load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _load_instances(path, M):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    if not rows:
        raise InputError(f"{path} is empty")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) != M:
        raise InputError(f"{path} has {len(header)} columns, expected {M} features")
    try:
        X = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise InputError(f"{path}: non-numeric value ({exc})") from None
    if X.size and X.shape[1] != M:
        raise InputError(f"{path}: ragged rows")
    return [h.strip() for h in header], X.reshape(-1, M)


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _manifest(command, config, seed, repairs, started):
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "repairs": repairs,
        "elapsed_seconds": round(time.time() - started, 3),
    }


def cmd_explain(args) -> int:
    started = time.time()
    partition = partition_from_json(_load_json(args.partition))
    dist = distribution_from_json(_load_json(args.dist), partition, repair=args.repair_psd)
    model = model_from_json(_load_json(args.model))
    if not (model.n_features == dist.dim == partition.n_features):
        raise ValidationError(
            f"dimension mismatch: model {model.n_features}, distribution {dist.dim}, "
            f"partition {partition.n_features} features"
        )
    names, X = _load_instances(args.instances, dist.dim)
    if args.standardize:
        model = standardize(
            model, dist, rngmod.stream(args.seed, rngmod.STANDARDIZE), args.n_std
        )
    if args.estimator == "mc":
        estimator = MonteCarloEstimator(args.mc_samples, args.seed)
    else:
        estimator = AnalyticEstimator()

    def explain(i):
        x = X[i]
        if args.method in ("closed-form", "theorem22"):
            return closed_form_group_values(model, dist, x, partition, estimator)
        cache = ContributionCache(model, dist, x, estimator, (i,))
        if args.method == "group":
            return group_shapley(model, dist, x, partition, cache=cache, cap=args.cap)
        if args.method == "post":
            return post_grouped_shapley(model, dist, x, partition, cache=cache, cap=args.cap)
        return feature_shapley(model, dist, x, cache=cache, cap=args.cap, labels=names)

    with ThreadPoolExecutor(max(1, args.threads)) as pool:
        explanations = list(pool.map(explain, range(X.shape[0])))

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EXPLAIN_COLUMNS)
    for i, e in enumerate(explanations):
        resid = e.efficiency_residual
        for k, label in enumerate(e.player_labels):
            se = None if e.phi_se is None else e.phi_se[k]
            w.writerow([i, label, _fmt(e.phi[k]), _fmt(e.base_value), _fmt(e.predicted),
                        _fmt(resid), _fmt(se)])
    _write(args.out, buf.getvalue())
    if args.out not in (None, "-"):
        config = {k: v for k, v in vars(args).items() if k not in ("func", "threads")}
        repairs = [] if dist.repair_distance is None else [
            {"frobenius_distance": dist.repair_distance}
        ]
        man = _manifest("explain", config, args.seed, repairs, started)
        _write(args.out + ".manifest.json", json.dumps(man, indent=2) + "\n")
    return 0


def _parse_rhos(values):
    out = []
    for v in values:
        out.extend(float(p) for p in str(v).split(",") if p.strip())
    return tuple(out)


def _config_from_args(args) -> ExperimentConfig:
    if args.manifest:
        cfg = dict(_load_json(args.manifest)["config"])
        cfg["models"] = tuple(cfg["models"])
        cfg["groupings"] = tuple(cfg["groupings"])
        cfg["rho_grid"] = tuple(cfg["rho_grid"])
        return ExperimentConfig(**cfg, threads=args.threads)
    if args.experiment is None:
        raise InputError("--experiment is required unless --manifest is given")
    kwargs = dict(
        experiment=args.experiment,
        groupings=(args.grouping,) if args.grouping else ("A", "B"),
        n_test=args.n_test,
        mc_samples=args.mc_samples,
        estimator="analytic" if args.estimator == "analytic" else "monte_carlo",
        seed=args.seed,
        n_std=args.n_std,
        repair=args.repair_psd,
        threads=args.threads,
    )
    if args.models:
        kwargs["models"] = tuple(args.models)
    if args.rho:
        kwargs["rho_grid"] = _parse_rhos(args.rho)
    if args.within_rho is not None:
        kwargs["within_rho"] = args.within_rho
    try:
        return ExperimentConfig(**kwargs)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_simulate(args) -> int:
    started = time.time()
    config = _config_from_args(args)
    result = run_experiment(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"experiment{config.experiment}"
    (out / f"{stem}_records.csv").write_text(to_csv(result.records, RECORD_COLUMNS), encoding="utf-8")
    (out / f"{stem}_summary.csv").write_text(
        to_csv(summarize(result.records), SUMMARY_COLUMNS), encoding="utf-8"
    )
    if result.errors:
        (out / f"{stem}_errors.csv").write_text(to_csv(result.errors, ERROR_COLUMNS), encoding="utf-8")
    man = _manifest("simulate", config.resolved(), config.seed, result.repairs, started)
    man["whiskers"] = "tukey-1.5iqr"
    man["grid_errors"] = len(result.errors)
    (out / f"{stem}_manifest.json").write_text(json.dumps(man, indent=2) + "\n", encoding="utf-8")
    if args.plot:
        from .plotting import boxplot_svg

        Path(args.plot).write_text(
            boxplot_svg(result.records, title=f"Experiment {config.experiment}"), encoding="utf-8"
        )
    if result.errors:
        for e in result.errors:
            print(f"warning: {e.model} grouping {e.grouping} rho={e.rho}: {e.message}", file=sys.stderr)
        return 1 if args.strict else 0
    return 0


def cmd_verify(args) -> int:
    from .verification import run_verification

    results = run_verification(
        trials=args.trials, seed=args.seed, models=args.model,
        n_instances=args.instances, identity_triples=args.identity_triples,
    )
    worst = 0.0
    for r in results:
        print(r.line())
        if r.max_deviation is not None:
            worst = max(worst, r.max_deviation)
    ok = all(r.passed for r in results)
    print(f"{'PASS' if ok else 'FAIL'}: max deviation {worst:.3e} (tolerance 1e-09)")
    return 0 if ok else 1


def cmd_plot(args) -> int:
    from .plotting import boxplot_svg

    try:
        text = Path(args.records).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {args.records}: {exc.strerror}") from None
    try:
        records = records_from_csv(text)
    except (KeyError, ValueError) as exc:
        raise InputError(f"{args.records} is not a records CSV: {exc}") from None
    if not records:
        raise InputError(f"{args.records} has no records")
    Path(args.out).write_text(boxplot_svg(records, title=args.title), encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    seed = rngmod.default_seed()
    threads = os.cpu_count() or 1
    p = argparse.ArgumentParser(prog="gshap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("explain", help="explain instances with Shapley values")
    e.add_argument("--model", required=True, help="model spec JSON")
    e.add_argument("--dist", required=True, help="distribution spec JSON")
    e.add_argument("--partition", required=True, help="partition spec JSON")
    e.add_argument("--instances", required=True, help="CSV with a header row and one instance per row")
    e.add_argument("--out", default="-", help="output CSV (default stdout)")
    e.add_argument(
        "--method", choices=("group", "post", "feature", "closed-form", "theorem22"), default="group",
        help="closed-form needs a separable model and independent groups (theorem22 is an alias)",
    )
    e.add_argument("--estimator", choices=("mc", "analytic"), default="analytic")
    e.add_argument("--mc-samples", type=int, default=1000)
    e.add_argument("--seed", type=int, default=seed)
    e.add_argument("--standardize", action="store_true", help="rescale the model to unit output SD")
    e.add_argument("--n-std", type=int, default=100_000)
    e.add_argument("--repair-psd", action="store_true", help="project a non-PSD covariance")
    e.add_argument("--cap", type=int, default=DEFAULT_EXACT_CAP, help="max players for exact enumeration")
    e.add_argument("--threads", type=int, default=threads)
    e.set_defaults(func=cmd_explain)

    s = sub.add_parser("simulate", help="run a simulation experiment")
    s.add_argument("--experiment", type=int, choices=(1, 2, 3))
    s.add_argument("--grouping", choices=("A", "B"), help="default: both")
    s.add_argument("--models", nargs="+", help="subset of the experiment's models")
    s.add_argument("--rho", action="append", help="between-group correlation(s); repeat or comma-separate")
    s.add_argument("--within-rho", type=float)
    s.add_argument("--n-test", type=int, default=100)
    s.add_argument("--mc-samples", type=int, default=1000)
    s.add_argument("--estimator", choices=("mc", "analytic"), default="mc")
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--n-std", type=int, default=100_000)
    s.add_argument("--repair-psd", action="store_true")
    s.add_argument("--threads", type=int, default=threads)
    s.add_argument("--out-dir", default=".")
    s.add_argument("--plot", help="also write an SVG boxplot here")
    s.add_argument("--strict", action="store_true", help="exit 1 if any grid point failed")
    s.add_argument("--manifest", help="replay the configuration stored in a manifest")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check the exact equivalences numerically")
    v.add_argument("--trials", type=int, default=20)
    v.add_argument("--seed", type=int, default=seed)
    v.add_argument("--model", action="append", help="restrict simulation-model checks (repeatable)")
    v.add_argument("--instances", type=int, default=5)
    v.add_argument("--identity-triples", type=int, default=200)
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plot", help="render records CSV as SVG boxplots")
    pl.add_argument("--records", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--title")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GroupShapError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
