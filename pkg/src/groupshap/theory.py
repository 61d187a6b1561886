"""Shortcuts that hold when the model is additively separable over the groups
and the groups are mutually independent, plus numerical checks of the
contribution-function identities those shortcuts rest on.

Every function here verifies both conditions first and raises
:class:`~groupshap.errors.ConditionsNotMet` instead of silently returning a
wrong answer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coalitions import (
    FeaturePartition,
    check_player_count,
    enumerate_subsets,
    mask_from_indices,
    shapley_weight,
)
from .contributions import AnalyticEstimator, ContributionCache
from .errors import ConditionsNotMet
from .explainer import Explanation
from .gaussian import GaussianModel
from .models import ModelSpec, NotSeparable, decompose_by_groups, restrict


def groups_independent(dist: GaussianModel, partition: FeaturePartition) -> bool:
    """True when every between-group covariance entry is exactly zero."""
    owner = np.empty(dist.dim, dtype=np.intp)
    for g, members in enumerate(partition.groups):
        owner[list(members)] = g
    between = owner[:, None] != owner[None, :]
    return not np.any(dist.covariance[between] != 0.0)


def check_conditions(
    model: ModelSpec, dist: GaussianModel, partition: FeaturePartition
) -> list[ModelSpec]:
    """Return the per-group sub-models, or raise if either condition fails."""
    parts = decompose_by_groups(model, partition)
    if isinstance(parts, NotSeparable):
        shown = ", ".join(f"{k}{tuple(i)}" for k, i in parts.offending[:5])
        raise ConditionsNotMet(
            f"model is not additively separable over the groups (cross-group terms: {shown})"
        )
    if not groups_independent(dist, partition):
        raise ConditionsNotMet("features in different groups are correlated")
    return parts


def conditions_hold(model, dist, partition) -> bool:
    try:
        check_conditions(model, dist, partition)
    except ConditionsNotMet:
        return False
    return True


def _local_cache(part, dist, x_star, members, estimator):
    """Contribution cache for one sub-model on its own group's features."""
    idx = list(members)
    return ContributionCache(
        restrict(part, idx), dist.marginal(idx), np.asarray(x_star)[idx], estimator
    )


def simplified_feature_shapley(
    model, dist, x_star, partition, estimator=None
) -> Explanation:
    """Feature-wise Shapley values computed group by group.

    For ``j`` in group ``i`` only the ``2**(|G_i|-1)`` subsets of that group
    are visited, using the group's own sub-model and marginal distribution.
    """
    estimator = estimator or AnalyticEstimator()
    parts = check_conditions(model, dist, partition)
    phi = np.zeros(dist.dim)
    for members, part in zip(partition.groups, parts):
        k = len(members)
        check_player_count(k)
        local = _local_cache(part, dist, x_star, members, estimator)
        for pos, j in enumerate(members):
            bit = 1 << pos
            total = 0.0
            for S in enumerate_subsets(k, pos):
                w = float(shapley_weight(S.size, k))
                total += w * (local.value(S | bit) - local.value(S))
            phi[j] = total
    full = ContributionCache(model, dist, x_star, AnalyticEstimator())
    base = sum(
        _local_cache(p, dist, x_star, g, AnalyticEstimator()).value(0)
        for g, p in zip(partition.groups, parts)
    )
    return Explanation(
        player_labels=tuple(f"x{j}" for j in range(dist.dim)),
        phi=phi,
        base_value=float(base),
        predicted=full.value(full.grand),
        metadata={"method": "simplified"},
    )


def closed_form_group_values(
    model, dist, x_star, partition, estimator=None
) -> Explanation:
    """Group values ``v_i(G_i) - v_i(empty)`` without any coalition enumeration."""
    estimator = estimator or AnalyticEstimator()
    parts = check_conditions(model, dist, partition)
    phi = np.empty(partition.G)
    base = 0.0
    for i, (members, part) in enumerate(zip(partition.groups, parts)):
        local = _local_cache(part, dist, x_star, members, estimator)
        empty = local.value(0)
        phi[i] = local.value(local.grand) - empty
        base += empty
    full = ContributionCache(model, dist, x_star, AnalyticEstimator())
    return Explanation(
        player_labels=partition.labels,
        phi=phi,
        base_value=float(base),
        predicted=full.value(full.grand),
        metadata={"method": "closed_form"},
    )


@dataclass
class IdentityReport:
    trials: int
    max_dev_contribution_identity: float
    max_dev_simplified_identity: float

    @property
    def max_deviation(self) -> float:
        return max(self.max_dev_contribution_identity, self.max_dev_simplified_identity)

    def passed(self, tol: float = 1e-9) -> bool:
        return self.max_deviation < tol


def _random_subset(members, rng) -> int:
    return mask_from_indices(j for j in members if rng.random() < 0.5)


def check_contribution_identities(
    model, dist, partition, x_star, trials: int, rng: np.random.Generator
) -> IdentityReport:
    """Check both contribution-function identities on random admissible inputs.

    First identity: for disjoint group sets ``T0`` and ``TAB`` and feature
    subsets ``S0`` of ``T0`` and ``SA``, ``SB`` of ``TAB``,
    ``v(S0+SA) - v(S0+SB) == v(SA) - v(SB)``.
    Second identity: for ``j`` in group ``i`` and ``S`` inside that group
    without ``j``, ``v(S+j) - v(S) == v_i(S+j) - v_i(S)``.

    The first trial always uses ``S0 = {}``.
    """
    parts = check_conditions(model, dist, partition)
    cache = ContributionCache(model, dist, x_star, AnalyticEstimator())
    dev1 = dev2 = 0.0
    G = partition.G
    for t in range(trials):
        role = rng.integers(0, 3, size=G)  # 0: T0, 1: TAB, 2: neither
        t0 = [j for g in np.flatnonzero(role == 0) for j in partition.groups[g]]
        tab = [j for g in np.flatnonzero(role == 1) for j in partition.groups[g]]
        s0 = 0 if t == 0 else _random_subset(t0, rng)
        sa = _random_subset(tab, rng)
        sb = _random_subset(tab, rng)
        lhs = cache.value(s0 | sa) - cache.value(s0 | sb)
        rhs = cache.value(sa) - cache.value(sb)
        dev1 = max(dev1, abs(lhs - rhs))

        g = int(rng.integers(G))
        members = partition.groups[g]
        pos = int(rng.integers(len(members)))
        local = _local_cache(parts[g], dist, x_star, members, AnalyticEstimator())
        local_s = _random_subset(range(len(members)), rng) & ~(1 << pos)
        global_s = mask_from_indices(members[k] for k in range(len(members)) if local_s >> k & 1)
        j = members[pos]
        lhs = cache.value(global_s | (1 << j)) - cache.value(global_s)
        rhs = local.value(local_s | (1 << pos)) - local.value(local_s)
        dev2 = max(dev2, abs(lhs - rhs))
    return IdentityReport(trials, dev1, dev2)
