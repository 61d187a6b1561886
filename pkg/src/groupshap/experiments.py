"""Simulation study: groupShapley vs post-grouped Shapley on Gaussian features.

For every (model, correlation) grid point the harness builds the covariance,
draws ``n_test`` instances from it, standardizes the model to unit output SD
under that same distribution, explains every instance with both methods and
records the mean absolute difference of the two group-value vectors.

Monte Carlo streams are named by (seed, experiment, model, covariance,
instance) and the coalition mask. When two groupings share a covariance
(experiments 1 and 2) they also share the feature-level contribution table,
so the post-grouped values of both groupings come from one set of draws.
"""

from __future__ import annotations

import csv
import io
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as rngmod
from .coalitions import FeaturePartition, validate_partition
from .contributions import AnalyticEstimator, ContributionCache, MonteCarloEstimator
from .errors import GroupShapError
from .explainer import feature_shapley, group_shapley, post_grouped_shapley
from .gaussian import CorrelationDesign, build_covariance, sample
from .models import SimulationModelId, simulation_model, standardize

log = logging.getLogger(__name__)

RHO_GRID = (0.0, 0.1, 0.3, 0.7, 0.9)
EXPERIMENT3_WITHIN = 0.87
WHISKER_RULE = "tukey-1.5iqr"

EXPERIMENT_MODELS = {
    1: ("lm1", "lm2", "lm3"),
    2: ("gam1", "gam2", "gam3"),
    3: ("lm2", "gam2"),
}

_GROUPINGS = {
    "A": ([[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]], ["G1", "G2", "G3"]),
    "B": ([[0, 1], [2, 3], [4, 5], [6, 7], [8, 9]], ["G1", "G2", "G3", "G4", "G5"]),
}
_MODEL_CODE = {m.value: k for k, m in enumerate(SimulationModelId)}


def simulation_partition(name: str) -> FeaturePartition:
    """Grouping ``"A"`` (three groups) or ``"B"`` (five pairs) of the 10 features."""
    groups, labels = _GROUPINGS[name.upper()]
    return validate_partition(groups, 10, labels=labels)


def rho_key(rho: float) -> int:
    """Integer stream key for a correlation value (resolution 1e-6)."""
    return int(round(float(rho) * 1_000_000)) + 1_000_000


def mad(pre, post) -> float:
    """Mean absolute difference between two group-value vectors."""
    pre = np.asarray(pre, dtype=float)
    post = np.asarray(post, dtype=float)
    if pre.shape != post.shape or pre.ndim != 1:
        raise ValueError(f"shape mismatch: {pre.shape} vs {post.shape}")
    return float(np.mean(np.abs(pre - post)))


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: int
    models: tuple[str, ...] | None = None
    groupings: tuple[str, ...] = ("A", "B")
    rho_grid: tuple[float, ...] = RHO_GRID
    within_rho: float | None = None
    n_test: int = 100
    mc_samples: int = 1000
    estimator: str = "monte_carlo"
    seed: int = 2021
    n_std: int = 100_000
    repair: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_MODELS:
            raise ValueError(f"experiment must be 1, 2 or 3, got {self.experiment}")
        if self.models is None:
            object.__setattr__(self, "models", EXPERIMENT_MODELS[self.experiment])
        object.__setattr__(self, "models", tuple(m.lower() for m in self.models))
        for m in self.models:
            SimulationModelId(m)
        object.__setattr__(self, "groupings", tuple(g.upper() for g in self.groupings))
        for g in self.groupings:
            if g not in _GROUPINGS:
                raise ValueError(f"unknown grouping {g!r}")
        if self.experiment == 3 and self.within_rho is None:
            object.__setattr__(self, "within_rho", EXPERIMENT3_WITHIN)
        if self.estimator not in ("monte_carlo", "analytic"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.n_test < 1 or self.mc_samples < 1:
            raise ValueError("n_test and mc_samples must be positive")
        object.__setattr__(self, "rho_grid", tuple(float(r) for r in self.rho_grid))

    def resolved(self) -> dict:
        d = asdict(self)
        d["models"] = list(self.models)
        d["groupings"] = list(self.groupings)
        d["rho_grid"] = list(self.rho_grid)
        d.pop("threads")
        return d


@dataclass(frozen=True)
class MadRecord:
    experiment: int
    model: str
    grouping: str
    within_rho: float
    rho: float
    instance: int
    mad: float


@dataclass(frozen=True)
class ErrorRecord:
    experiment: int
    model: str
    grouping: str
    within_rho: float
    rho: float
    message: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[MadRecord] = field(default_factory=list)
    errors: list[ErrorRecord] = field(default_factory=list)
    repairs: list[dict] = field(default_factory=list)

    def mads(self, model, grouping, rho) -> np.ndarray:
        return np.array(
            [
                r.mad
                for r in self.records
                if r.model == model and r.grouping == grouping and r.rho == rho
            ]
        )


def _explain_instance(model, dist, x, partitions, estimator, keys):
    cache = ContributionCache(model, dist, x, estimator, keys)
    features = feature_shapley(model, dist, x, cache=cache)
    out = []
    for part in partitions:
        pre = group_shapley(model, dist, x, part, cache=cache)
        post = post_grouped_shapley(model, dist, x, part, features=features)
        out.append(mad(pre.phi, post.phi))
    return out


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every grid point of ``config``; deterministic given ``config.seed``."""
    result = ExperimentResult(config)
    partitions = {g: simulation_partition(g) for g in config.groupings}
    if config.estimator == "analytic":
        estimator = AnalyticEstimator()
    else:
        estimator = MonteCarloEstimator(config.mc_samples, config.seed)

    # covariance blocks: experiment 3 depends on the grouping, 1 and 2 do not
    if config.experiment == 3:
        blocks = [(g,) for g in config.groupings]
    else:
        blocks = [tuple(config.groupings)]

    records = []
    for model_name in config.models:
        code = _MODEL_CODE[model_name]
        for rho in config.rho_grid:
            # keyed by value, so a sub-grid reproduces the full-grid numbers
            r_idx = rho_key(rho)
            within = config.within_rho if config.within_rho is not None else rho
            for block in blocks:
                g_code = "AB".index(block[0]) if config.experiment == 3 else 0
                design = CorrelationDesign(within, rho, partitions[block[0]])
                try:
                    dist = build_covariance(design, repair=config.repair)
                    std_rng = rngmod.stream(
                        config.seed, rngmod.STANDARDIZE, config.experiment, code, r_idx, g_code
                    )
                    model = standardize(simulation_model(model_name), dist, std_rng, config.n_std)
                except GroupShapError as exc:
                    for g in block:
                        result.errors.append(
                            ErrorRecord(config.experiment, model_name, g, within, rho, str(exc))
                        )
                    warnings.warn(f"grid point skipped: {exc}", stacklevel=2)
                    continue
                if dist.repair_distance is not None:
                    result.repairs.append(
                        {
                            "model": model_name,
                            "groupings": list(block),
                            "within_rho": within,
                            "rho": rho,
                            "frobenius_distance": dist.repair_distance,
                        }
                    )
                data_rng = rngmod.stream(
                    config.seed, rngmod.DATA, config.experiment, r_idx, g_code
                )
                X = sample(dist, config.n_test, data_rng)
                parts = [partitions[g] for g in block]

                def work(i, model=model, dist=dist, X=X, parts=parts, code=code,
                         r_idx=r_idx, g_code=g_code):
                    keys = (config.experiment, code, r_idx, g_code, i)
                    return _explain_instance(model, dist, X[i], parts, estimator, keys)

                if config.threads > 1:
                    with ThreadPoolExecutor(config.threads) as pool:
                        per_instance = list(pool.map(work, range(config.n_test)))
                else:
                    per_instance = [work(i) for i in range(config.n_test)]
                for i, values in enumerate(per_instance):
                    for g, value in zip(block, values):
                        records.append(
                            MadRecord(config.experiment, model_name, g, within, rho, i, value)
                        )
                log.info("experiment %d %s rho=%s done", config.experiment, model_name, rho)
    records.sort(key=lambda r: (r.model, r.grouping, r.rho, r.instance))
    result.records = records
    return result


@dataclass(frozen=True)
class Summary:
    experiment: int
    model: str
    grouping: str
    within_rho: float
    rho: float
    n: int
    mean: float
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float


def _box_stats(values: np.ndarray):
    q1, med, q3 = np.percentile(values, [25, 50, 75])
    iqr = q3 - q1
    inside = values[(values >= q1 - 1.5 * iqr) & (values <= q3 + 1.5 * iqr)]
    return float(med), float(q1), float(q3), float(inside.min()), float(inside.max())


def summarize(records) -> list[Summary]:
    """Boxplot statistics per (experiment, model, grouping, rho).

    Whiskers follow Tukey's rule: the most extreme values within 1.5 IQR of
    the quartiles.
    """
    groups: dict[tuple, list] = {}
    for r in records:
        groups.setdefault((r.experiment, r.model, r.grouping, r.within_rho, r.rho), []).append(r.mad)
    out = []
    for key in sorted(groups):
        values = np.asarray(groups[key], dtype=float)
        if values.size == 0:
            warnings.warn(f"no records for {key}; omitted", stacklevel=2)
            continue
        med, q1, q3, lo, hi = _box_stats(values)
        out.append(Summary(*key, values.size, float(values.mean()), med, q1, q3, lo, hi))
    return out


RECORD_COLUMNS = ("experiment", "model", "grouping", "within_rho", "rho", "instance", "mad")
SUMMARY_COLUMNS = (
    "experiment", "model", "grouping", "within_rho", "rho", "n",
    "mean", "median", "q1", "q3", "whisker_low", "whisker_high",
)
ERROR_COLUMNS = ("experiment", "model", "grouping", "within_rho", "rho", "message")


def _fmt(v):
    # repr gives the shortest round-tripping float text
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def to_csv(rows, columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        d = asdict(row)
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def records_from_csv(text: str) -> list[MadRecord]:
    rows = csv.DictReader(io.StringIO(text))
    return [
        MadRecord(
            int(r["experiment"]), r["model"], r["grouping"], float(r["within_rho"]),
            float(r["rho"]), int(r["instance"]), float(r["mad"]),
        )
        for r in rows
    ]
