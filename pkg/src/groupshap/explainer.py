"""Feature-wise, group-wise and post-grouped Shapley values.

All three reduce to the same computation: a player game whose worth for a
set of players is ``v`` of the union of their features. Players are single
features for :func:`feature_shapley` and groups for :func:`group_shapley`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coalitions import (
    DEFAULT_EXACT_CAP,
    FeaturePartition,
    check_player_count,
    shapley_from_table,
    singleton_partition,
)
from .contributions import ContributionCache, MonteCarloEstimator


@dataclass
class Explanation:
    """Shapley values for one instance.

    ``phi_se`` holds a conservative Monte Carlo error bound per value
    (``None`` for exact estimators).
    """

    player_labels: tuple[str, ...]
    phi: np.ndarray
    base_value: float
    predicted: float
    phi_se: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def efficiency_residual(self) -> float:
        return float(self.predicted - self.base_value - np.sum(self.phi))

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.player_labels, (float(p) for p in self.phi)))

    def __getitem__(self, label: str) -> float:
        return float(self.phi[self.player_labels.index(label)])


def _union_masks(player_masks: tuple[int, ...]) -> list[int]:
    """Feature mask for every player coalition, indexed by player mask."""
    P = len(player_masks)
    out = [0] * (1 << P)
    for t in range(1, 1 << P):
        low = t & -t
        out[t] = out[t ^ low] | player_masks[low.bit_length() - 1]
    return out


def _player_game(
    cache: ContributionCache, partition: FeaturePartition, labels, cap, meta
) -> Explanation:
    check_player_count(partition.G, cap)
    fmasks = _union_masks(partition.masks)
    pairs = [cache.get(m) for m in fmasks]
    values = np.array([p[0] for p in pairs])
    errors = np.array([p[1] for p in pairs])
    mc = isinstance(cache.estimator, MonteCarloEstimator)
    phi, phi_se = shapley_from_table(values, errors if mc else None)
    meta = dict(meta)
    meta.update(cache.estimator.describe())
    meta["coalitions_evaluated"] = len(fmasks)
    meta["terms_per_player"] = 1 << (partition.G - 1)
    return Explanation(
        player_labels=tuple(labels),
        phi=phi,
        base_value=float(values[0]),
        predicted=float(values[-1]),
        phi_se=phi_se,
        metadata=meta,
    )


def _cache_for(model, dist, x_star, estimator, cache, stream_keys):
    if cache is None:
        return ContributionCache(model, dist, x_star, estimator, stream_keys)
    return cache


def feature_shapley(
    model,
    dist,
    x_star,
    estimator=None,
    *,
    cache: ContributionCache | None = None,
    cap: int | None = DEFAULT_EXACT_CAP,
    labels=None,
    stream_keys=(0,),
) -> Explanation:
    """Shapley value of every single feature (all ``2**M`` coalitions)."""
    cache = _cache_for(model, dist, x_star, estimator, cache, stream_keys)
    M = cache.n_features
    check_player_count(M, cap)
    labels = labels or [f"x{j}" for j in range(M)]
    return _player_game(
        cache, singleton_partition(M), labels, cap, {"method": "feature"}
    )


def group_shapley(
    model,
    dist,
    x_star,
    partition: FeaturePartition,
    estimator=None,
    *,
    cache: ContributionCache | None = None,
    cap: int | None = DEFAULT_EXACT_CAP,
    stream_keys=(0,),
) -> Explanation:
    """groupShapley: the groups themselves are the players."""
    cache = _cache_for(model, dist, x_star, estimator, cache, stream_keys)
    if partition.n_features != cache.n_features:
        raise ValueError(
            f"partition covers {partition.n_features} features, "
            f"distribution has {cache.n_features}"
        )
    return _player_game(cache, partition, partition.labels, cap, {"method": "group"})


def post_grouped_shapley(
    model,
    dist,
    x_star,
    partition: FeaturePartition,
    estimator=None,
    *,
    cache: ContributionCache | None = None,
    cap: int | None = DEFAULT_EXACT_CAP,
    stream_keys=(0,),
    features: Explanation | None = None,
) -> Explanation:
    """Feature-wise Shapley values summed within each group.

    A precomputed feature-wise explanation can be passed as ``features`` to
    post-group it under several partitions without recomputation.
    """
    if features is None:
        features = feature_shapley(
            model, dist, x_star, estimator, cache=cache, cap=cap, stream_keys=stream_keys
        )
    if partition.n_features != features.phi.size:
        raise ValueError(
            f"partition covers {partition.n_features} features, "
            f"explanation has {features.phi.size}"
        )
    phi = np.array([features.phi[list(g)].sum() for g in partition.groups])
    se = None
    if features.phi_se is not None:
        se = np.array([features.phi_se[list(g)].sum() for g in partition.groups])
    meta = dict(features.metadata)
    meta["method"] = "post"
    return Explanation(
        player_labels=partition.labels,
        phi=phi,
        base_value=features.base_value,
        predicted=features.predicted,
        phi_se=se,
        metadata=meta,
    )
