"""Closed-form predictive models built from a small term algebra.

A model is

    f(x) = (raw(x) - shift) / scale
    raw(x) = intercept + sum c x_i + sum c cos(x_i) + sum g x_i x_j + sum h(x_i, x_j)

with ``h(a, b) = a*b + a*b**2 + b*a**2``. Indices are 0-based everywhere; the
1-based indices used when the simulation models are written down by hand are
converted once, in :func:`simulation_model`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .coalitions import FeaturePartition
from .errors import DegenerateModelError, ValidationError


@dataclass(frozen=True)
class ModelSpec:
    n_features: int
    intercept: float = 0.0
    linear_terms: tuple[tuple[int, float], ...] = ()
    cosine_terms: tuple[tuple[int, float], ...] = ()
    product_terms: tuple[tuple[int, int, float], ...] = ()
    hfun_terms: tuple[tuple[int, int], ...] = ()
    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        M = self.n_features
        if isinstance(M, bool) or not isinstance(M, (int, np.integer)) or M < 1:
            raise ValidationError(f"n_features must be a positive integer, got {M!r}")
        object.__setattr__(
            self, "linear_terms", tuple((int(i), float(c)) for i, c in self.linear_terms)
        )
        object.__setattr__(
            self, "cosine_terms", tuple((int(i), float(c)) for i, c in self.cosine_terms)
        )
        object.__setattr__(
            self,
            "product_terms",
            tuple((int(i), int(j), float(c)) for i, j, c in self.product_terms),
        )
        object.__setattr__(
            self, "hfun_terms", tuple((int(i), int(j)) for i, j in self.hfun_terms)
        )
        for i, _ in self.linear_terms + self.cosine_terms:
            self._check_index(i)
        for t in self.product_terms + self.hfun_terms:
            i, j = t[0], t[1]
            self._check_index(i)
            self._check_index(j)
            if i == j:
                raise ValidationError(f"interaction term {t} uses feature {i} twice")
        if not self.scale > 0:
            raise ValidationError(f"scale must be positive, got {self.scale}")

    def _check_index(self, i):
        if not 0 <= i < self.n_features:
            raise ValidationError(
                f"term index {i} outside 0..{self.n_features - 1}"
            )

    def terms(self):
        """Yield ``(kind, indices)`` for every non-constant term."""
        for i, _ in self.linear_terms:
            yield "linear", (i,)
        for i, _ in self.cosine_terms:
            yield "cosine", (i,)
        for i, j, _ in self.product_terms:
            yield "product", (i, j)
        for i, j in self.hfun_terms:
            yield "hfun", (i, j)

    def to_json(self) -> dict:
        return {
            "n_features": self.n_features,
            "intercept": self.intercept,
            "linear": [list(t) for t in self.linear_terms],
            "cosine": [list(t) for t in self.cosine_terms],
            "product": [list(t) for t in self.product_terms],
            "hfun": [list(t) for t in self.hfun_terms],
            "scale": self.scale,
            "shift": self.shift,
        }


def raw(model: ModelSpec, X) -> np.ndarray:
    """Term sum before standardization."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValidationError(
            f"expected {model.n_features} feature columns, got shape {X.shape}"
        )
    # feature-major view: contiguous rows when X is Fortran-ordered (as sampled)
    XT = X.T
    out = np.full(X.shape[0], float(model.intercept))
    if model.linear_terms:
        idx, coef = zip(*model.linear_terms)
        out += np.array(coef) @ XT[list(idx)]
    if model.cosine_terms:
        idx, coef = zip(*model.cosine_terms)
        out += np.array(coef) @ np.cos(XT[list(idx)])
    if model.product_terms:
        i, j, coef = (list(v) for v in zip(*model.product_terms))
        out += np.array(coef) @ (XT[i] * XT[j])
    if model.hfun_terms:
        i, j = (list(v) for v in zip(*model.hfun_terms))
        a, b = XT[i], XT[j]
        # a*b + a*b**2 + b*a**2
        out += (a * b * (1.0 + a + b)).sum(axis=0)
    return out


def evaluate(model: ModelSpec, X) -> np.ndarray:
    """Model predictions for the rows of ``X`` (a single vector is one row)."""
    return (raw(model, X) - model.shift) / model.scale


def predict_one(model: ModelSpec, x) -> float:
    return float(evaluate(model, np.asarray(x, dtype=float)[None, :])[0])


def scaled(model: ModelSpec, factor: float) -> ModelSpec:
    """Multiply the intercept, shift and every coefficient by ``factor``.

    h-terms carry no coefficient, so models containing them are rejected.
    """
    if model.hfun_terms:
        raise ValueError("h-terms have no coefficient to scale")
    return replace(
        model,
        intercept=factor * model.intercept,
        linear_terms=tuple((i, factor * c) for i, c in model.linear_terms),
        cosine_terms=tuple((i, factor * c) for i, c in model.cosine_terms),
        product_terms=tuple((i, j, factor * c) for i, j, c in model.product_terms),
        shift=factor * model.shift,
    )


def standardize(model: ModelSpec, dist, rng: np.random.Generator, n_std: int = 100_000):
    """Set ``scale`` to the empirical SD of ``raw(x)`` under ``dist``.

    ``shift`` is set to 0: additive constants cancel in every Shapley
    difference, so only the scale matters.
    """
    from .gaussian import sample

    if n_std < 10_000:
        raise ValueError(f"n_std must be at least 10000, got {n_std}")
    X = sample(dist, n_std, rng)
    sd = float(np.std(raw(model, X), ddof=1))
    if not sd >= 1e-12:
        raise DegenerateModelError(
            f"model output SD {sd:.3g} is too small to standardize"
        )
    return replace(model, scale=sd, shift=0.0)


@dataclass(frozen=True)
class NotSeparable:
    """Cross-group terms that prevent additive separation."""

    offending: tuple[tuple[str, tuple[int, ...]], ...]

    def __bool__(self):
        return False


def decompose_by_groups(model: ModelSpec, partition: FeaturePartition):
    """Split ``model`` into one sub-model per group, or report why that fails.

    Every sub-model keeps the full feature width and ``scale``; the intercept
    and ``shift`` go to the first group, so the sub-model outputs sum to the
    model output exactly.
    """
    if partition.n_features != model.n_features:
        raise ValidationError(
            f"partition covers {partition.n_features} features, model has {model.n_features}"
        )
    owner = {j: g for g, members in enumerate(partition.groups) for j in members}
    offending = []
    for kind, idx in model.terms():
        if len({owner[i] for i in idx}) > 1:
            offending.append((kind, idx))
    if offending:
        return NotSeparable(tuple(offending))

    parts = []
    for g in range(partition.G):
        first = g == 0
        parts.append(
            ModelSpec(
                n_features=model.n_features,
                intercept=model.intercept if first else 0.0,
                linear_terms=tuple(t for t in model.linear_terms if owner[t[0]] == g),
                cosine_terms=tuple(t for t in model.cosine_terms if owner[t[0]] == g),
                product_terms=tuple(t for t in model.product_terms if owner[t[0]] == g),
                hfun_terms=tuple(t for t in model.hfun_terms if owner[t[0]] == g),
                scale=model.scale,
                shift=model.shift if first else 0.0,
            )
        )
    return parts


def restrict(model: ModelSpec, indices) -> ModelSpec:
    """Re-index a model that only uses ``indices`` onto ``0..len(indices)-1``."""
    local = {int(j): k for k, j in enumerate(indices)}
    try:
        return ModelSpec(
            n_features=len(local),
            intercept=model.intercept,
            linear_terms=tuple((local[i], c) for i, c in model.linear_terms),
            cosine_terms=tuple((local[i], c) for i, c in model.cosine_terms),
            product_terms=tuple((local[i], local[j], c) for i, j, c in model.product_terms),
            hfun_terms=tuple((local[i], local[j]) for i, j in model.hfun_terms),
            scale=model.scale,
            shift=model.shift,
        )
    except KeyError as exc:
        raise ValueError(f"model uses feature {exc.args[0]} outside {sorted(local)}") from None


class SimulationModelId(enum.Enum):
    LM1 = "lm1"
    LM2 = "lm2"
    LM3 = "lm3"
    GAM1 = "gam1"
    GAM2 = "gam2"
    GAM3 = "gam3"


BETA = (-0.6, 0.2, -0.8, 1.6, 0.3, -0.8, 0.5, 0.7, 0.6, -0.3, 1.5)
GAMMA = (0.4, -0.6, -2.2, 1.1, 0.0)
DELTA = (0.1, 0.9)
GAM_INTERCEPT = -0.6

# 1-based pairs as written for the simulation models
WITHIN_PAIRS = ((1, 2), (3, 4), (5, 6), (7, 8), (9, 10))
BETWEEN_PAIRS = ((1, 5), (1, 7), (1, 9), (3, 5), (3, 7), (3, 9), (5, 9))


def _zero_based(pairs):
    return tuple((i - 1, j - 1) for i, j in pairs)


def simulation_model(model_id: SimulationModelId | str) -> ModelSpec:
    """One of the six unstandardized simulation models over 10 features."""
    model_id = SimulationModelId(model_id.lower() if isinstance(model_id, str) else model_id)
    linear = tuple((i, b) for i, b in enumerate(BETA[1:]))
    cosine = tuple((i, 1.0) for i in range(10))
    within = _zero_based(WITHIN_PAIRS)
    between = _zero_based(BETWEEN_PAIRS)

    if model_id is SimulationModelId.LM1:
        return ModelSpec(10, BETA[0], linear_terms=linear)
    if model_id is SimulationModelId.LM2:
        prods = tuple((i, j, g) for (i, j), g in zip(within, GAMMA))
        return ModelSpec(10, BETA[0], linear_terms=linear, product_terms=prods)
    if model_id is SimulationModelId.LM3:
        prods = tuple((i, j, c) for (i, j), c in zip(between, GAMMA + DELTA))
        return ModelSpec(10, BETA[0], linear_terms=linear, product_terms=prods)
    if model_id is SimulationModelId.GAM1:
        return ModelSpec(10, GAM_INTERCEPT, cosine_terms=cosine)
    if model_id is SimulationModelId.GAM2:
        return ModelSpec(10, GAM_INTERCEPT, cosine_terms=cosine, hfun_terms=within)
    return ModelSpec(10, GAM_INTERCEPT, cosine_terms=cosine, hfun_terms=between)


def model_from_json(doc: Mapping | str) -> ModelSpec:
    """Parse a model document; ``{"simulation_model": "lm2"}`` is accepted as shorthand."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    if not isinstance(doc, Mapping):
        raise ValidationError("model spec must be a JSON object")
    if "simulation_model" in doc:
        try:
            base = simulation_model(str(doc["simulation_model"]))
        except ValueError:
            raise ValidationError(
                f"unknown simulation_model {doc['simulation_model']!r}; "
                f"expected one of {[m.value for m in SimulationModelId]}"
            ) from None
        return replace(
            base,
            scale=float(doc.get("scale", base.scale)),
            shift=float(doc.get("shift", base.shift)),
        )
    try:
        linear = [(i, c) for i, c in doc.get("linear", [])]
        cosine = [(i, c) for i, c in doc.get("cosine", [])]
        product = [(i, j, c) for i, j, c in doc.get("product", [])]
        hfun = [(i, j) for i, j in doc.get("hfun", [])]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"malformed term list: {exc}") from None
    if "n_features" in doc:
        M = doc["n_features"]
    else:
        used = [t[0] for t in linear + cosine] + [t[k] for t in product + hfun for k in (0, 1)]
        if not used:
            raise ValidationError('constant model needs an explicit "n_features"')
        M = max(used) + 1
    return ModelSpec(
        n_features=M,
        intercept=float(doc.get("intercept", 0.0)),
        linear_terms=tuple(linear),
        cosine_terms=tuple(cosine),
        product_terms=tuple(product),
        hfun_terms=tuple(hfun),
        scale=float(doc.get("scale", 1.0)),
        shift=float(doc.get("shift", 0.0)),
    )
