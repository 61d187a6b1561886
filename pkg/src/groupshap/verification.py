"""Executable checks of the separable/independent-groups equivalences.

Each check compares two routes to the same numbers with the exact
(analytic) contribution function and reports the largest deviation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .coalitions import validate_partition
from .contributions import ContributionCache
from .experiments import simulation_partition
from .explainer import feature_shapley, group_shapley, post_grouped_shapley
from .gaussian import GaussianModel, sample
from .models import ModelSpec, SimulationModelId, simulation_model
from .theory import (
    check_contribution_identities,
    conditions_hold,
    simplified_feature_shapley,
    closed_form_group_values,
)

TOLERANCE = 1e-9


def model_code(name: str) -> int:
    return list(SimulationModelId).index(SimulationModelId(name))


@dataclass
class CheckResult:
    subject: str
    check: str
    max_deviation: float | None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.max_deviation is None or self.max_deviation < TOLERANCE

    def line(self) -> str:
        if self.max_deviation is None:
            return f"SKIP  {self.subject:<26} {self.check:<28} {self.note}"
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.subject:<26} {self.check:<28} max deviation {self.max_deviation:.3e}"


def equivalence_deviations(model, dist, partition, X) -> dict[str, float]:
    """Largest deviations between the four routes over the rows of ``X``."""
    dev = {"group_vs_post": 0.0, "group_vs_closed_form": 0.0, "feature_vs_simplified": 0.0}
    for x in X:
        cache = ContributionCache(model, dist, x)
        feats = feature_shapley(model, dist, x, cache=cache)
        pre = group_shapley(model, dist, x, partition, cache=cache)
        post = post_grouped_shapley(model, dist, x, partition, features=feats)
        closed = closed_form_group_values(model, dist, x, partition)
        simple = simplified_feature_shapley(model, dist, x, partition)
        dev["group_vs_post"] = max(dev["group_vs_post"], np.max(np.abs(pre.phi - post.phi)))
        dev["group_vs_closed_form"] = max(
            dev["group_vs_closed_form"], np.max(np.abs(pre.phi - closed.phi))
        )
        dev["feature_vs_simplified"] = max(
            dev["feature_vs_simplified"], np.max(np.abs(feats.phi - simple.phi))
        )
    return {k: float(v) for k, v in dev.items()}


def random_separable_case(rng: np.random.Generator, max_features: int = 8):
    """Random block-independent Gaussian, partition and within-group model."""
    M = int(rng.integers(2, max_features + 1))
    perm = rng.permutation(M)
    cuts = np.sort(rng.choice(np.arange(1, M), size=int(rng.integers(0, M)), replace=False))
    groups = [sorted(int(j) for j in g) for g in np.split(perm, cuts)]
    partition = validate_partition(groups, M)

    cov = np.zeros((M, M))
    for g in groups:
        k = len(g)
        A = rng.normal(size=(k, k))
        cov[np.ix_(g, g)] = A @ A.T / k + 0.3 * np.eye(k)
    dist = GaussianModel(rng.normal(scale=0.5, size=M), cov)

    lin, cos, prod, hf = [], [], [], []
    for g in groups:
        for j in g:
            if rng.random() < 0.7:
                lin.append((j, rng.normal()))
            if rng.random() < 0.4:
                cos.append((j, rng.normal()))
        for a in range(len(g)):
            for b in range(a + 1, len(g)):
                u = rng.random()
                if u < 0.3:
                    prod.append((g[a], g[b], rng.normal()))
                elif u < 0.5:
                    hf.append((g[a], g[b]))
    model = ModelSpec(M, float(rng.normal()), tuple(lin), tuple(cos), tuple(prod), tuple(hf))
    return model, dist, partition


def run_verification(
    trials: int = 20,
    seed: int = 2021,
    models=None,
    n_instances: int = 5,
    identity_triples: int = 200,
) -> list[CheckResult]:
    """Simulation-model checks under independent unit-variance features, then
    ``trials`` random synthetic cases with up to 8 features."""
    models = [SimulationModelId(m.lower()).value for m in (models or [m.value for m in SimulationModelId])]
    dist = GaussianModel(np.zeros(10), np.eye(10))
    X = sample(dist, n_instances, rngmod.stream(seed, rngmod.DATA, 0))
    results = []
    for name in models:
        model = simulation_model(name)
        for g in ("A", "B"):
            partition = simulation_partition(g)
            subject = f"{name} grouping {g}"
            if not conditions_hold(model, dist, partition):
                results.append(
                    CheckResult(subject, "equivalences", None, "conditions not satisfied, check skipped")
                )
                continue
            for check, dev in equivalence_deviations(model, dist, partition, X).items():
                results.append(CheckResult(subject, check, dev))
            if trials > 0:
                report = check_contribution_identities(
                    model, dist, partition, X[0], identity_triples,
                    rngmod.stream(seed, rngmod.IDENTITIES, model_code(name), "AB".index(g)),
                )
                results.append(CheckResult(subject, "contribution_identity", report.max_dev_contribution_identity))
                results.append(CheckResult(subject, "simplified_identity", report.max_dev_simplified_identity))

    for t in range(trials):
        rng = rngmod.stream(seed, rngmod.SYNTHETIC, t)
        model, sdist, partition = random_separable_case(rng)
        Xs = sample(sdist, 2, rng)
        subject = f"synthetic #{t} (M={model.n_features}, G={partition.G})"
        for check, dev in equivalence_deviations(model, sdist, partition, Xs).items():
            results.append(CheckResult(subject, check, dev))
        report = check_contribution_identities(model, sdist, partition, Xs[0], 20, rng)
        results.append(CheckResult(subject, "contribution_identities", report.max_deviation))
    return results
