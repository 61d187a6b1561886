"""Coalition bitmasks, Shapley kernel weights and feature partitions.

Coalitions are plain Python integers used as bitmasks over player indices
0..P-1. :class:`Coalition` is a thin ``int`` subclass that adds ``size`` and
``members`` for readability in places where that matters; everything else
accepts bare ints.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import CapacityError, EnumerationRefused, ValidationError

MAX_PLAYERS = 63
DEFAULT_EXACT_CAP = 25


class Coalition(int):
    """Bitmask over player indices."""

    @property
    def size(self) -> int:
        return int.bit_count(self)

    @property
    def members(self) -> tuple[int, ...]:
        return mask_to_indices(self)

    def __repr__(self):
        return f"Coalition({set(self.members) or '{}'})"


def mask_from_indices(indices: Iterable[int]) -> int:
    mask = 0
    for i in indices:
        mask |= 1 << int(i)
    return mask


def mask_to_indices(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def check_player_count(player_count: int, cap: int | None = DEFAULT_EXACT_CAP) -> None:
    """Raise if ``player_count`` cannot or should not be enumerated exactly."""
    if player_count < 1:
        raise ValueError(f"player_count must be >= 1, got {player_count}")
    if player_count > MAX_PLAYERS:
        raise CapacityError(
            f"{player_count} players exceed the {MAX_PLAYERS}-player bitmask capacity"
        )
    if cap is not None and player_count > cap:
        raise EnumerationRefused(
            f"exact enumeration over {player_count} players exceeds the cap of {cap}; "
            "group the features and use group_shapley instead"
        )


def enumerate_subsets(
    player_count: int, excluded_player: int, cap: int | None = DEFAULT_EXACT_CAP
) -> Iterator[Coalition]:
    """Yield every coalition of ``range(player_count)`` not containing ``excluded_player``.

    Exactly ``2**(player_count - 1)`` coalitions are produced, in increasing
    order of the compressed index.
    """
    check_player_count(player_count, cap)
    if not 0 <= excluded_player < player_count:
        raise ValueError(
            f"excluded_player {excluded_player} outside 0..{player_count - 1}"
        )
    low = (1 << excluded_player) - 1
    for r in range(1 << (player_count - 1)):
        # open a zero bit at position excluded_player
        yield Coalition((r & low) | ((r & ~low) << 1))


def shapley_weight(coalition_size: int, player_count: int) -> Fraction:
    """Exact Shapley kernel weight ``s!(P-s-1)!/P!``."""
    if player_count < 1:
        raise ValueError(f"player_count must be >= 1, got {player_count}")
    if not 0 <= coalition_size < player_count:
        raise ValueError(
            f"coalition_size {coalition_size} outside 0..{player_count - 1}"
        )
    return Fraction(
        factorial(coalition_size) * factorial(player_count - coalition_size - 1),
        factorial(player_count),
    )


@lru_cache(maxsize=None)
def _weight_vector(player_count: int) -> np.ndarray:
    w = np.array(
        [float(shapley_weight(s, player_count)) for s in range(player_count)]
    )
    w.setflags(write=False)
    return w


def shapley_from_table(values: np.ndarray, errors: np.ndarray | None = None):
    """Exact Shapley values of a game given as a full value table.

    Parameters
    ----------
    values : array of length ``2**P``
        ``values[mask]`` is the worth of the coalition ``mask``.
    errors : array of length ``2**P``, optional
        Standard errors of the entries in ``values``. When given, a
        conservative bound ``sum w (se(S+j) + se(S))`` is returned per player.

    Returns
    -------
    phi : ndarray of length P
    phi_err : ndarray of length P or None
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    P = n.bit_length() - 1
    if n != 1 << P or P < 1:
        raise ValueError(f"value table length {n} is not 2**P with P >= 1")
    check_player_count(P, cap=None)
    w = _weight_vector(P)
    masks = np.arange(n, dtype=np.int64)
    sizes = np.bitwise_count(masks).astype(np.int64)
    phi = np.empty(P)
    phi_err = None if errors is None else np.empty(P)
    for j in range(P):
        bit = np.int64(1) << j
        without = masks[(masks & bit) == 0]
        wj = w[sizes[without]]
        phi[j] = wj @ (values[without | bit] - values[without])
        if phi_err is not None:
            phi_err[j] = wj @ (errors[without | bit] + errors[without])
    return phi, phi_err


@dataclass(frozen=True)
class FeaturePartition:
    """Ordered partition of feature indices ``0..M-1`` into labelled groups."""

    groups: tuple[tuple[int, ...], ...]
    labels: tuple[str, ...]
    n_features: int

    @property
    def M(self) -> int:
        return self.n_features

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def masks(self) -> tuple[int, ...]:
        return tuple(mask_from_indices(g) for g in self.groups)

    def group_of(self, feature: int) -> int:
        for i, g in enumerate(self.groups):
            if feature in g:
                return i
        raise KeyError(feature)

    def reordered(self, order: Sequence[int]) -> "FeaturePartition":
        return FeaturePartition(
            tuple(self.groups[i] for i in order),
            tuple(self.labels[i] for i in order),
            self.n_features,
        )

    def to_json(self) -> dict:
        return {
            "M": self.n_features,
            "groups": {lab: list(g) for lab, g in zip(self.labels, self.groups)},
        }


def validate_partition(
    groups: Sequence[Iterable[int]] | Mapping[str, Iterable[int]],
    M: int,
    labels: Sequence[str] | None = None,
) -> FeaturePartition:
    """Check that ``groups`` partitions ``range(M)`` and freeze it.

    ``groups`` may be a list of index collections (labels default to
    ``G1..GG`` unless given) or a mapping ``label -> indices``.
    """
    if isinstance(groups, Mapping):
        labels = [str(k) for k in groups.keys()]
        groups = list(groups.values())
    try:
        groups = [list(g) for g in groups]
    except TypeError:
        raise ValidationError("each group must be a collection of feature indices") from None
    if labels is None:
        labels = [f"G{i + 1}" for i in range(len(groups))]
    labels = [str(lab) for lab in labels]

    if not isinstance(M, (int, np.integer)) or isinstance(M, bool) or M < 1:
        raise ValidationError(f"M must be a positive integer, got {M!r}")
    if len(labels) != len(groups):
        raise ValidationError("number of labels differs from number of groups")
    if not groups:
        raise ValidationError("partition has no groups")
    if any(not lab for lab in labels):
        raise ValidationError("group labels must be non-empty strings")
    if len(set(labels)) != len(labels):
        raise ValidationError(f"duplicate group labels in {labels}")

    owner: dict[int, str] = {}
    frozen = []
    for lab, g in zip(labels, groups):
        if not g:
            raise ValidationError(f"group {lab!r} is empty")
        idx = []
        for i in g:
            if isinstance(i, bool) or not isinstance(i, (int, np.integer)):
                raise ValidationError(f"group {lab!r}: index {i!r} is not an integer")
            i = int(i)
            if not 0 <= i < M:
                raise ValidationError(
                    f"group {lab!r}: feature {i} out of range 0..{M - 1}"
                )
            if i in owner:
                raise ValidationError(
                    f"feature {i} appears in both group {owner[i]!r} and group {lab!r}"
                )
            owner[i] = lab
            idx.append(i)
        frozen.append(tuple(sorted(idx)))
    missing = sorted(set(range(M)) - owner.keys())
    if missing:
        raise ValidationError(
            f"features {missing} are not assigned to any group"
        )
    return FeaturePartition(tuple(frozen), tuple(labels), int(M))


def partition_from_json(doc: Mapping | str) -> FeaturePartition:
    """Parse ``{"M": int, "groups": {"label": [indices...]}}``."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, Mapping) or "M" not in doc or "groups" not in doc:
        raise ValidationError('partition spec needs keys "M" and "groups"')
    groups = doc["groups"]
    if not isinstance(groups, Mapping):
        raise ValidationError('"groups" must map labels to index lists')
    return validate_partition(groups, doc["M"])


def singleton_partition(M: int, labels: Sequence[str] | None = None) -> FeaturePartition:
    return validate_partition([[j] for j in range(M)], M, labels=labels)


def subset_counts(M: int, G: int) -> dict[str, int]:
    """Summation-term counts per player for feature-wise vs group-wise Shapley."""
    return {
        "feature_terms": 1 << (M - 1),
        "group_terms": 1 << (G - 1),
        "reduction": 1 << (M - G),
    }
