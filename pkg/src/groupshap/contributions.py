"""Contribution functions ``v(S) = E[f(x) | x_S = x*_S]``.

Two estimators share one interface:

* :class:`AnalyticEstimator` evaluates the conditional expectation exactly
  from Gaussian conditional moments. This is possible because every term of
  a :class:`~groupshap.models.ModelSpec` has a closed-form Gaussian
  expectation.
* :class:`MonteCarloEstimator` averages the model over draws from the
  conditional distribution, with a per-coalition random stream.

The grand coalition is never estimated: ``v(all) = f(x*)``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .gaussian import GaussianModel, condition, sample
from .models import ModelSpec, evaluate, predict_one


def _conditional_full(dist: GaussianModel, x_star: np.ndarray, mask: int):
    plan = dist.plan(mask)
    mu = dist.mean
    m = np.empty(dist.dim)
    m[plan.cond] = x_star[plan.cond]
    m[plan.free] = mu[plan.free] + plan.regression @ (x_star[plan.cond] - mu[plan.cond])
    c = np.zeros((dist.dim, dist.dim))
    c[np.ix_(plan.free, plan.free)] = plan.covariance
    return m, c


def expected_raw(model: ModelSpec, mean: np.ndarray, cov: np.ndarray) -> float:
    """E[raw(x)] for x ~ N(mean, cov); ``cov`` may be singular."""
    total = float(model.intercept)
    if model.linear_terms:
        idx, coef = zip(*model.linear_terms)
        total += float(mean[list(idx)] @ np.array(coef))
    if model.cosine_terms:
        idx, coef = zip(*model.cosine_terms)
        idx = list(idx)
        ecos = np.exp(-0.5 * np.diag(cov)[idx]) * np.cos(mean[idx])
        total += float(ecos @ np.array(coef))
    if model.product_terms:
        i, j, coef = (list(v) for v in zip(*model.product_terms))
        exy = mean[i] * mean[j] + cov[i, j]
        total += float(exy @ np.array(coef))
    if model.hfun_terms:
        i, j = (np.array(v) for v in zip(*model.hfun_terms))
        ma, mb = mean[i], mean[j]
        va, vb, cab = cov[i, i], cov[j, j], cov[i, j]
        e_ab = ma * mb + cab
        e_ab2 = ma * mb**2 + ma * vb + 2.0 * mb * cab
        e_ba2 = mb * ma**2 + mb * va + 2.0 * ma * cab
        total += float(np.sum(e_ab + e_ab2 + e_ba2))
    return total


def contribution_analytic(model: ModelSpec, dist: GaussianModel, x_star, S: int) -> float:
    """Exact ``E[f(x) | x_S = x*_S]``."""
    x_star = np.asarray(x_star, dtype=float)
    S = int(S)
    if S == dist.full_mask:
        return predict_one(model, x_star)
    m, c = _conditional_full(dist, x_star, S)
    return (expected_raw(model, m, c) - model.shift) / model.scale


def contribution_mc(
    model: ModelSpec,
    dist: GaussianModel,
    x_star,
    S: int,
    n: int,
    rng: np.random.Generator,
    return_se: bool = False,
):
    """Monte Carlo estimate of ``E[f(x) | x_S = x*_S]`` from ``n`` conditional draws.

    With ``return_se`` the pair ``(estimate, standard error)`` is returned.
    """
    x_star = np.asarray(x_star, dtype=float)
    S = int(S)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if S == dist.full_mask:
        v = predict_one(model, x_star)
        return (v, 0.0) if return_se else v
    plan = dist.plan(S)
    cond = condition(dist, S, x_star[plan.cond])
    y = evaluate(model, sample(cond, n, rng))
    v = float(np.mean(y))
    if not return_se:
        return v
    se = float(np.std(y, ddof=1) / np.sqrt(n)) if n > 1 else float("inf")
    return v, se


@dataclass(frozen=True)
class AnalyticEstimator:
    tag = "analytic"

    def estimate(self, model, dist, x_star, mask, key):
        return contribution_analytic(model, dist, x_star, mask), 0.0

    def instance_key(self, *keys):
        return 0

    def describe(self):
        return {"estimator": "analytic"}


@dataclass(frozen=True)
class MonteCarloEstimator:
    """Conditional Monte Carlo with ``n_samples`` draws per coalition."""

    n_samples: int = 1000
    seed: int = 0
    tag = "monte_carlo"

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")

    def instance_key(self, *keys):
        return rngmod.stream_key(self.seed, rngmod.MONTE_CARLO, *keys)

    def estimate(self, model, dist, x_star, mask, key):
        gen = rngmod.coalition_stream(key, mask)
        return contribution_mc(
            model, dist, x_star, mask, self.n_samples, gen, return_se=True
        )

    def describe(self):
        return {"estimator": "monte_carlo", "n_samples": self.n_samples, "seed": self.seed}


class ContributionCache:
    """Memoised ``v(S)`` for one explained instance.

    Keys are feature-level bitmasks, so feature-wise and group-wise Shapley
    computations on the same instance share entries. ``stream_keys`` names
    the instance for Monte Carlo seeding (defaults to ``(0,)``).
    """

    def __init__(self, model, dist, x_star, estimator=None, stream_keys=(0,)):
        self.model = model
        self.dist = dist
        self.x_star = np.array(x_star, dtype=float)
        if self.x_star.shape != (dist.dim,):
            raise ValueError(
                f"instance has shape {self.x_star.shape}, distribution has {dist.dim} features"
            )
        if model.n_features != dist.dim:
            raise ValueError(
                f"model has {model.n_features} features, distribution has {dist.dim}"
            )
        self.estimator = estimator or AnalyticEstimator()
        self._key = self.estimator.instance_key(*stream_keys)
        self.entries: dict[int, tuple[float, float]] = {}
        self.model_evaluations = 0
        self._lock = threading.Lock()

    @property
    def n_features(self) -> int:
        return self.dist.dim

    @property
    def grand(self) -> int:
        return self.dist.full_mask

    def get(self, mask: int) -> tuple[float, float]:
        """``(v, standard error)`` for the feature coalition ``mask``."""
        mask = int(mask)
        hit = self.entries.get(mask)
        if hit is not None:
            return hit
        v, se = self.estimator.estimate(self.model, self.dist, self.x_star, mask, self._key)
        with self._lock:
            if mask not in self.entries:
                self.entries[mask] = (v, se)
                if mask == self.grand:
                    self.model_evaluations += 1
                elif isinstance(self.estimator, MonteCarloEstimator):
                    self.model_evaluations += self.estimator.n_samples
        return self.entries[mask]

    def value(self, mask: int) -> float:
        return self.get(mask)[0]

    def __len__(self):
        return len(self.entries)
